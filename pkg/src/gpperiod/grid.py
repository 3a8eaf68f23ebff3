"""Frequency grids and per-frequency score tables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lightcurve import Criterion, LightCurve, PeriodEstimate, rank_candidates


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("empty frequency grid")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("grid frequencies must be positive and finite")
        if np.any(np.diff(v) <= 0):
            raise ValueError("grid must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def step(self) -> float:
        return float(np.min(np.diff(self.values))) if len(self) > 1 else math.inf


@dataclass(frozen=True, eq=False)
class ScoreTable:
    grid: FrequencyGrid
    scores: np.ndarray
    criterion: Criterion

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if s.shape != (len(self.grid),):
            raise ValueError("scores and grid lengths differ")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "criterion", Criterion(self.criterion))

    def _key(self) -> np.ndarray:
        # larger key = better; nan treated as worst
        k = self.scores if self.criterion.maximize else -self.scores
        return np.where(np.isnan(k), -np.inf, k)

    def best_index(self) -> int:
        key = self._key()
        # argmax returns the first (lowest-frequency) maximum
        return int(np.argmax(key))

    def best_frequency(self) -> float:
        return float(self.grid.values[self.best_index()])

    def peak_indices(self, k: int) -> np.ndarray:
        """Indices of the ``k`` best local optima, best first.

        Ties go to the lower frequency. If the table has fewer than ``k``
        finite local optima the remaining slots are filled with the best
        other grid points.
        """
        key = self._key()
        n = len(key)
        left = np.concatenate(([-np.inf], key[:-1]))
        right = np.concatenate((key[1:], [-np.inf]))
        if n > 2:
            # a jump well beyond the grid step separates fine-grid neighborhoods;
            # each neighborhood is scanned as its own segment
            d = np.diff(self.grid.values)
            gap = d > 1.5 * d.min()
            left[1:][gap] = -np.inf
            right[:-1][gap] = -np.inf
        # plateaus: first point of a flat top counts as the peak
        is_peak = (key > left) & (key >= right) & np.isfinite(key)
        peaks = np.flatnonzero(is_peak)
        order = peaks[np.lexsort((peaks, -key[peaks]))]
        chosen = list(order[:k])
        if len(chosen) < k:
            rest = np.setdiff1d(np.arange(n), chosen)
            rest = rest[np.lexsort((rest, -key[rest]))]
            chosen += list(rest[: k - len(chosen)])
        return np.asarray(chosen, dtype=int)

    def top_frequencies(self, k: int) -> np.ndarray:
        return self.grid.values[self.peak_indices(k)]

    def candidates(self, k: int) -> list[PeriodEstimate]:
        idx = self.peak_indices(k)
        return rank_candidates(self.grid.values[idx], self.scores[idx], self.criterion)


def arithmetic_grid(lo: float, hi: float, step: float) -> FrequencyGrid:
    if not (lo > 0 and hi > lo and step > 0):
        raise ValueError(f"invalid grid range ({lo}, {hi}, {step})")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return FrequencyGrid(lo + step * np.arange(n))


def build_coarse_grid(lc: LightCurve, cfg) -> FrequencyGrid:
    """Coarse grid from ``1/T`` to ``N/T`` in steps of ``1/(oversample T)``, unless a range is given."""
    if cfg.coarse_range is not None:
        return arithmetic_grid(*cfg.coarse_range)
    T = lc.span
    if not T > 0:
        raise ValueError("time span is zero")
    n = len(lc)
    return arithmetic_grid(1.0 / T, n / T, 1.0 / (cfg.oversample * T))


def build_fine_grid(top_freqs, radius: float, step: float) -> FrequencyGrid:
    """Union of ``f + k*step`` for ``|k*step| <= radius`` around each frequency."""
    top = np.atleast_1d(np.asarray(top_freqs, dtype=float))
    if top.size == 0 or np.any(top <= 0):
        raise ValueError("top frequencies must be non-empty and positive")
    m = int(round(radius / step))
    offs = step * np.arange(-m, m + 1)
    vals = np.sort((top[:, None] + offs[None, :]).ravel())
    vals = vals[vals > 0]
    keep = np.concatenate(([True], np.diff(vals) > 1e-9 * step))
    return FrequencyGrid(vals[keep])
