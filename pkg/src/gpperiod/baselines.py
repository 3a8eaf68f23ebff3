"""Classical comparison methods: Lomb-Scargle periodogram and phase dispersion minimization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FrequencyGrid, ScoreTable, arithmetic_grid, build_fine_grid
from .lightcurve import Criterion, LightCurve, PeriodEstimate

PDM_RANGE = (0.02, 5.0, 0.001)
_CHUNK = 1 << 20  # max frequency x sample elements per vectorized block


@dataclass(frozen=True, eq=False)
class Periodogram:
    grid: FrequencyGrid
    power: np.ndarray
    method: Criterion

    def table(self) -> ScoreTable:
        return ScoreTable(self.grid, self.power, self.method)


def _chunks(n_freq: int, n_pts: int):
    size = max(1, _CHUNK // max(1, n_pts))
    for lo in range(0, n_freq, size):
        yield slice(lo, min(n_freq, lo + size))


def lomb_scargle(lc: LightCurve, grid: FrequencyGrid) -> Periodogram:
    """Classical LS power at ordinary frequencies ``grid`` (converted to angular internally)."""
    x = np.asarray(lc.times, dtype=float)
    x = x - x[0]
    y = np.asarray(lc.mags) - np.mean(lc.mags)
    out = np.empty(len(grid))
    for sl in _chunks(len(grid), len(x)):
        omega = 2.0 * np.pi * grid.values[sl][:, None]
        two = 2.0 * omega * x[None, :]
        tau = np.arctan2(np.sin(two).sum(1), np.cos(two).sum(1))[:, None] / (2.0 * omega)
        eta = omega * (x[None, :] - tau)
        c, s = np.cos(eta), np.sin(eta)
        cc, ss = (c * c).sum(1), (s * s).sum(1)
        yc, ys = (c * y).sum(1), (s * y).sum(1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = np.where(cc > 0, yc * yc / cc, 0.0)
            ts = np.where(ss > 1e-12 * len(x), ys * ys / ss, 0.0)
        out[sl] = 0.5 * (tc + ts)
    return Periodogram(grid, out, Criterion.LS)


def pdm(lc: LightCurve, grid: FrequencyGrid, bins: int = 15) -> Periodogram:
    """Sum over phase bins of the within-bin sample variance (lower is better).

    Bins with fewer than two points contribute nothing.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    t = np.asarray(lc.times, dtype=float) - lc.times[0]
    y = np.asarray(lc.mags) - np.mean(lc.mags)
    n = len(t)
    out = np.empty(len(grid))
    for sl in _chunks(len(grid), n):
        f = grid.values[sl]
        m = len(f)
        phase = np.mod(t[None, :] * f[:, None], 1.0)
        b = np.minimum((phase * bins).astype(np.int64), bins - 1)
        key = (np.arange(m)[:, None] * bins + b).ravel()
        yy = np.broadcast_to(y, (m, n)).ravel()
        cnt = np.bincount(key, minlength=m * bins).reshape(m, bins)
        s1 = np.bincount(key, weights=yy, minlength=m * bins).reshape(m, bins)
        s2 = np.bincount(key, weights=yy * yy, minlength=m * bins).reshape(m, bins)
        with np.errstate(divide="ignore", invalid="ignore"):
            ss = s2 - np.where(cnt > 0, s1 * s1 / cnt, 0.0)
            var = np.where(cnt >= 2, np.maximum(ss, 0.0) / (cnt - 1), 0.0)
        out[sl] = var.sum(1)
    return Periodogram(grid, out, Criterion.PDM)


def _method(method) -> Criterion:
    return Criterion(str(getattr(method, "value", method)).upper())


def default_grid(lc: LightCurve, method, oversample: int = 8) -> FrequencyGrid:
    """LS uses ``[1/T, N/T]`` in steps of ``1/(oversample T)``; PDM uses ``[0.02, 5]`` by 0.001."""
    if _method(method) is Criterion.PDM:
        return arithmetic_grid(*PDM_RANGE)
    T = lc.span
    return arithmetic_grid(1.0 / T, len(lc) / T, 1.0 / (oversample * T))


def _scan(lc, grid, method, bins) -> Periodogram:
    return lomb_scargle(lc, grid) if method is Criterion.LS else pdm(lc, grid, bins)


def baseline_estimate(lc: LightCurve, method, grid: FrequencyGrid | None = None,
                      top_k: int = 10, bins: int = 15, refine: bool | None = None) -> list[PeriodEstimate]:
    """Ranked candidates from a periodogram scan.

    With ``refine`` the ``top_k`` peaks of the first scan are rescanned on a
    grid ten times finer spanning half a grid step either side. It defaults to
    on for LS (whose automatic grid step is ``1/(8T)``) and off for PDM.
    """
    method = _method(method)
    if method not in (Criterion.LS, Criterion.PDM):
        raise ValueError(f"unknown baseline {method!r}")
    if grid is None:
        grid = default_grid(lc, method)
    if refine is None:
        refine = method is Criterion.LS
    pg = _scan(lc, grid, method, bins)
    degenerate = bool(np.ptp(pg.power) == 0)
    if refine and len(grid) > 1 and not degenerate:
        radius = 0.5 * grid.step
        fine = build_fine_grid(pg.table().top_frequencies(top_k), radius, radius / 10)
        pg = _scan(lc, fine, method, bins)
    cands = pg.table().candidates(top_k)
    if degenerate:
        cands = [PeriodEstimate(c.frequency, c.score, c.criterion, c.rank, degenerate=True) for c in cands]
    return cands
