"""Domain knowledge as period scorers: MAP regularization, top-K filtering and the
double-period heuristic for eclipsing-binary-like curves."""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gp import log_marginal_likelihood
from .kernel import Hyperparams
from .lightcurve import Criterion, LightCurve, PeriodEstimate, fold


class PeriodScorer(abc.ABC):
    """Log-likelihood of a lightcurve folded at a trial period under some shape model.

    Implementations must be deterministic; higher means more plausible. The
    score is an unnormalized log-prior over periods, so only differences
    between periods of the same curve are meaningful.
    """

    @abc.abstractmethod
    def score(self, lc: LightCurve, period: float) -> float:
        ...


@dataclass(frozen=True)
class ReferenceScorer(PeriodScorer):
    """Truncated Fourier series fit to the folded, mean-subtracted curve.

    Returns ``-RSS / (2 * noise_var)``. When ``noise_var`` is None the sample
    variance of the magnitudes is used, which keeps the scale independent of
    the trial period.
    """

    n_harmonics: int = 3
    ridge: float = 1e-6
    noise_var: float | None = None

    def design(self, phases: np.ndarray) -> np.ndarray:
        k = np.arange(1, self.n_harmonics + 1)
        ang = 2.0 * np.pi * phases[:, None] * k[None, :]
        return np.hstack([np.ones((len(phases), 1)), np.cos(ang), np.sin(ang)])

    def rss(self, lc: LightCurve, period: float) -> float:
        pc = fold(lc, period)
        y = pc.mags - np.mean(pc.mags)
        A = self.design(pc.phases)
        coef = np.linalg.solve(A.T @ A + self.ridge * np.eye(A.shape[1]), A.T @ y)
        r = y - A @ coef
        return float(r @ r)

    def score(self, lc: LightCurve, period: float) -> float:
        var = self.noise_var if self.noise_var is not None else float(np.var(lc.mags, ddof=1))
        if not var > 0:
            return 0.0
        return -self.rss(lc, period) / (2.0 * var)


def map_score(lc: LightCurve, period: float, h: Hyperparams, scorer: PeriodScorer, gamma: float) -> float:
    """``gamma * log evidence + (1 - gamma) * scorer`` at frequency ``1 / period``."""
    if not period > 0:
        raise ValueError("period must be positive")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if gamma == 0.0:
        return scorer.score(lc, period)
    lml, _ = log_marginal_likelihood(lc, h.with_w(1.0 / period))
    if gamma == 1.0:
        return lml
    return gamma * lml + (1.0 - gamma) * scorer.score(lc, period)


def _best(scores: Sequence[float]) -> int:
    s = np.asarray(scores, dtype=float)
    s = np.where(np.isnan(s), -np.inf, s)
    return int(np.argmax(s))  # first maximum: earlier (better-ranked) entries win ties


def filter_select(lc: LightCurve, candidates: Sequence[PeriodEstimate], scorer: PeriodScorer) -> PeriodEstimate:
    """Pick the candidate whose folded curve the scorer likes best."""
    if not candidates:
        raise ValueError("no candidates")
    if len(candidates) == 1:
        return candidates[0]
    return candidates[_best([scorer.score(lc, c.period) for c in candidates])]


def double_period_filter(lc: LightCurve, candidates: Sequence[PeriodEstimate],
                         scorer: PeriodScorer) -> PeriodEstimate:
    """Score every candidate period and its double; return the best of all."""
    if not candidates:
        raise ValueError("no candidates")
    trials = []
    for c in candidates:
        trials.append((c, c.period))
        trials.append((c, 2.0 * c.period))
    scores = [scorer.score(lc, p) for _, p in trials]
    i = _best(scores)
    cand, period = trials[i]
    if i % 2 == 0:
        return cand
    return PeriodEstimate.from_period(period, scores[i], Criterion.FILTER, cand.rank)


def combine_methods(lc: LightCurve, cand_a: Sequence[PeriodEstimate], cand_b: Sequence[PeriodEstimate],
                    scorer: PeriodScorer) -> PeriodEstimate:
    if not cand_a or not cand_b:
        raise ValueError("both candidate lists must be non-empty")
    return double_period_filter(lc, list(cand_a) + list(cand_b), scorer)
