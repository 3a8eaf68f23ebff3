"""Cheaper scans: ensemble subsampling for the coarse grid and the
first-order low-rank Cholesky shift with an epsilon-net for the fine grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import gp
from .gp import _score_lower
from .grid import FrequencyGrid, ScoreTable
from .kernel import Hyperparams, cov_grad
from .lightcurve import Criterion, LightCurve
from .linalg import CholeskyFactor, EigenPairs, NotPositiveDefiniteError, _choldate_many, sym_eigen


@dataclass(frozen=True)
class SubsampleConfig:
    fraction: float = 0.15
    repetitions: int = 10
    min_points: int = 30
    max_points: int = 40
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must be in (0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 1 <= self.min_points <= self.max_points:
            raise ValueError("need 1 <= min_points <= max_points")

    def subset_size(self, n: int) -> int:
        size = int(round(self.fraction * n))
        return min(max(size, self.min_points), self.max_points, n)


@dataclass(frozen=True)
class LowRankConfig:
    rank: int | None = None  # None means floor(N / 2)
    epsilon: float = 0.005

    def __post_init__(self):
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def rank_for(self, n: int) -> int:
        return max(1, n // 2) if self.rank is None else min(self.rank, n)


def subsample_indices(n: int, cfg: SubsampleConfig) -> np.ndarray:
    """``R`` sorted index subsets; subset ``j`` depends only on ``(seed, j)``."""
    size = cfg.subset_size(n)
    return np.array([
        np.sort(np.random.default_rng([cfg.seed, j]).choice(n, size, replace=False))
        for j in range(cfg.repetitions)
    ])


def subsample_ensemble_score(lc: LightCurve, grid: FrequencyGrid, h: Hyperparams,
                             cfg: SubsampleConfig, criterion=Criterion.ML) -> ScoreTable:
    """Average the criterion over ``R`` fixed random subsets of the series."""
    criterion = Criterion(criterion)
    n = len(lc)
    y = np.asarray(lc.mags) - np.mean(lc.mags)
    if n <= cfg.min_points:
        scores = gp.scan_scores(lc.times, y, grid.values, h, criterion)
    else:
        idx = subsample_indices(n, cfg)
        scores = gp.scan_ensemble_scores(np.asarray(lc.times)[idx], y[idx], grid.values, h, criterion)
    return ScoreTable(grid, scores, criterion)


def taylor_kernel_step(h: Hyperparams, times, w0: float) -> np.ndarray:
    """Derivative of the Gram matrix with respect to frequency at ``w0``."""
    return cov_grad(h.with_w(w0), times, "w")


def _shift_vectors(eig: EigenPairs, dw: float, rank: int) -> tuple[np.ndarray, np.ndarray]:
    vals = eig.values[:rank]
    vecs = eig.vectors[:, :rank]
    signs = np.sign(vals) * math.copysign(1.0, dw)
    V = (vecs * np.sqrt(np.abs(vals) * abs(dw))).T
    # updates before downdates keeps intermediate matrices as far from singular as possible
    order = np.argsort(-signs, kind="stable")
    return np.ascontiguousarray(V[order]), np.ascontiguousarray(signs[order])


def lowrank_chol_shift(base: CholeskyFactor, ktilde, dw: float, cfg: LowRankConfig,
                       eig: EigenPairs | None = None) -> CholeskyFactor:
    """Approximate factor of ``K(w0 + dw) + sigma2 I`` from the factor at ``w0``.

    Applies the ``M`` largest-magnitude eigen-components of ``dw * ktilde`` as
    rank-one up/downdates. Raises :class:`NotPositiveDefiniteError` when a
    downdate fails; callers then factor exactly.
    """
    if abs(dw) >= cfg.epsilon:
        raise ValueError(f"|dw|={abs(dw)} is not below epsilon={cfg.epsilon}")
    if dw == 0:
        return base
    if eig is None:
        eig = sym_eigen(ktilde)
    V, signs = _shift_vectors(eig, dw, cfg.rank_for(base.n))
    U = np.array(base.L.T, order="C")
    if not _choldate_many(U, V, signs):
        raise NotPositiveDefiniteError("low-rank downdate lost positive definiteness")
    return CholeskyFactor(np.ascontiguousarray(U.T))


def epsnet_anchors(values: np.ndarray, epsilon: float) -> np.ndarray:
    """Greedy left-to-right epsilon-cover.

    Returns, for every grid point, the index of the anchor it is shifted from.
    """
    n = len(values)
    owner = np.empty(n, dtype=int)
    i = 0
    while i < n:
        a = i
        while a + 1 < n and values[a + 1] - values[i] < epsilon:
            a += 1
        j = i
        while j < n and values[j] - values[a] < epsilon:
            j += 1
        # move the anchor to the middle of its group when that still covers it,
        # halving the largest shift
        m = i + int(np.argmin(np.abs(values[i:j] - 0.5 * (values[i] + values[j - 1]))))
        if max(values[m] - values[i], values[j - 1] - values[m]) < epsilon:
            a = m
        owner[i:j] = a
        i = j
    # reassign every point to its nearest anchor (ties to the lower one)
    anchors = np.unique(owner)
    pos = np.searchsorted(values[anchors], values)
    lo = anchors[np.clip(pos - 1, 0, len(anchors) - 1)]
    hi = anchors[np.clip(pos, 0, len(anchors) - 1)]
    return np.where(np.abs(values - values[lo]) <= np.abs(values[hi] - values), lo, hi)


@numba.njit(cache=True)
def _shifted_score(Ua, V, signs, y, code, U, L, z, X):
    n = Ua.shape[0]
    for i in range(n):
        for j in range(n):
            U[i, j] = Ua[i, j]
    if not _choldate_many(U, V, signs):
        return False, 0.0
    for i in range(n):
        for j in range(i + 1):
            L[i, j] = U[j, i]
    return True, _score_lower(L, y, z, X, code)


def epsnet_fine_scan(lc: LightCurve, fine: FrequencyGrid, h: Hyperparams, cfg: LowRankConfig,
                     criterion=Criterion.ML) -> ScoreTable:
    """Fine-grid scan with exact factorizations only at epsilon-net anchors."""
    criterion = Criterion(criterion)
    code = gp._code(criterion)
    t = gp._centered_times(lc.times)
    y = np.ascontiguousarray(np.asarray(lc.mags) - np.mean(lc.mags))
    n = len(t)
    rank = cfg.rank_for(n)
    freqs = fine.values
    owner = epsnet_anchors(freqs, cfg.epsilon)
    scores = np.empty(len(freqs))
    bad = -np.inf if criterion.maximize else np.inf

    L = np.empty((n, n))
    S = np.empty(n)
    C = np.empty(n)
    z = np.empty(n)
    X = np.empty((n, n)) if code == gp.CODE_CV else np.empty((1, 1))
    U = np.empty((n, n))
    Lw = np.zeros((n, n))

    def exact(k):
        if gp._factor(t, freqs[k], h.beta, h.ell, h.sigma2, L, S, C):
            return gp._score_lower(L, y, z, X, code)
        return bad

    for a in np.unique(owner):
        members = np.flatnonzero(owner == a)
        ok = gp._factor(t, freqs[a], h.beta, h.ell, h.sigma2, L, S, C)
        if not ok:
            for k in members:
                scores[k] = exact(k)
            continue
        scores[a] = gp._score_lower(L, y, z, X, code)
        Ua = np.ascontiguousarray(np.tril(L).T)
        eig = sym_eigen(taylor_kernel_step(h, t, freqs[a]))
        for k in members:
            if k == a:
                continue
            V, signs = _shift_vectors(eig, freqs[k] - freqs[a], rank)
            ok, val = _shifted_score(Ua, V, signs, y, code, U, Lw, z, X)
            scores[k] = val if ok else exact(k)
    return ScoreTable(fine, scores, criterion)
