"""Period estimation by alternating conjugate-gradient fits of the nuisance
hyperparameters with coarse and fine frequency-grid scans."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .fastpath import LowRankConfig, SubsampleConfig, epsnet_fine_scan, subsample_ensemble_score
from .grid import FrequencyGrid, ScoreTable, build_coarse_grid, build_fine_grid
from .kernel import Hyperparams
from .lightcurve import Criterion, LightCurve, PeriodEstimate
from .linalg import NotPositiveDefiniteError

log = logging.getLogger(__name__)

__all__ = [
    "DegenerateSeriesError", "SearchConfig", "NuisanceFit", "SearchResult",
    "FrequencyGrid", "ScoreTable", "build_coarse_grid", "build_fine_grid",
    "optimize_nuisance", "grid_scan", "estimate_period", "run_search",
]


class DegenerateSeriesError(ValueError):
    """The series has no variation, so there is no periodic signal to find."""


@dataclass(frozen=True)
class SearchConfig:
    criterion: Criterion = Criterion.ML
    l1: int = 2
    l2: int = 2
    top_k: int = 10
    oversample: int = 8
    coarse_range: tuple[float, float, float] | None = None
    fine_radius: float = 0.001
    fine_step: float = 0.0001
    fine_cover: bool = True
    restarts: int = 1
    seed: int = 0
    max_evals: int = 100
    gamma: float = 1.0
    subsample: SubsampleConfig | None = None
    lowrank: LowRankConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        if self.criterion not in (Criterion.ML, Criterion.CV, Criterion.MAP):
            raise ValueError(f"search criterion must be ML, CV or MAP, not {self.criterion}")
        if min(self.l1, self.l2, self.top_k, self.restarts, self.oversample) < 1:
            raise ValueError("l1, l2, top_k, restarts and oversample must be >= 1")
        if not 0 < self.fine_step < self.fine_radius:
            raise ValueError("need 0 < fine_step < fine_radius")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


# ---------------------------------------------------------------------------
# nuisance optimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NuisanceFit:
    hyper: Hyperparams
    lml: float
    n_evals: int
    success: bool


def _log_bounds(y: np.ndarray, h0: Hyperparams) -> tuple[np.ndarray, np.ndarray]:
    v = float(np.var(y)) if np.var(y) > 0 else 1.0
    lo = np.log([1e-6 * v, h0.w / 4.0, 1e-2, 1e-8 * v])
    hi = np.log([1e4 * v, h0.w * 4.0, 1e2, 1e2 * v])
    return np.minimum(lo, np.log(h0.as_array())), np.maximum(hi, np.log(h0.as_array()))


def optimize_nuisance(lc, h0: Hyperparams, max_evals: int = 100, tol: float = 1e-3) -> NuisanceFit:
    """Polak-Ribiere conjugate-gradient ascent of the log evidence in log-parameters.

    All four hyperparameters move jointly. Stops when the log-parameter
    gradient satisfies ``|g|_inf <= tol * (1 + |lml|)`` or after ``max_evals``
    evaluations. If no step is ever accepted, ``h0`` is returned with
    ``success=False``.
    """
    t, y, _ = gp._as_xy(lc)
    lo, hi = _log_bounds(y, h0)

    # optimize over x = scale * log(theta); the diagonal Fisher information at h0
    # sets the scale so that the frequency direction is not far stiffer than the rest
    try:
        scale = np.sqrt(np.clip(gp.fisher_diag_log(t, y, h0), 1e-2, 1e8))
    except NotPositiveDefiniteError:
        scale = np.ones(4)
    lo, hi = lo * scale, hi * scale

    def fg(x):
        u = x / scale
        h = Hyperparams.from_array(np.exp(u))
        try:
            f, g = gp.value_and_grad(t, y, h)
        except NotPositiveDefiniteError:
            return -math.inf, None
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            return -math.inf, None
        return f, g * np.exp(u) / scale

    x = np.log(h0.as_array()) * scale
    f, g = fg(x)
    evals = 1
    if g is None:
        return NuisanceFit(h0, f, evals, False)
    d = g.copy()
    step = 1.0 / max(1.0, float(np.max(np.abs(g))))
    moved = False
    failed = False
    it = 0
    while evals < max_evals:
        # stationarity is judged on the plain log-parameter gradient
        if np.max(np.abs(g * scale)) <= tol * (1.0 + abs(f)):
            break
        steepest = it % len(x) == 0 or float(g @ d) <= 0
        if steepest:
            d = g.copy()
        alpha = step
        accepted = False
        first_try = True
        while evals < max_evals:
            xn = np.clip(x + alpha * d, lo, hi)
            dx = xn - x
            if np.max(np.abs(dx)) < 1e-12:
                break
            fn, gn = fg(xn)
            evals += 1
            if gn is not None and fn >= f + 1e-4 * float(g @ dx) and fn >= f:
                accepted = True
                break
            alpha *= 0.3
            first_try = False
        if not accepted:
            if not steepest:
                # retry along the gradient before giving up
                it = 0
                step = 1.0 / max(1.0, float(np.max(np.abs(g))))
                continue
            failed = True
            break
        moved = True
        beta_pr = max(0.0, float(gn @ (gn - g)) / float(g @ g))
        d = gn + beta_pr * d
        # cap the next trial step at a log-change of 2 per coordinate
        step = min(alpha * (2.0 if first_try else 1.0), 2.0 / max(1e-12, float(np.max(np.abs(d)))))
        x, f, g = xn, fn, gn
        it += 1
    if not moved and failed:
        return NuisanceFit(h0, f, evals, False)
    return NuisanceFit(Hyperparams.from_array(np.exp(x / scale)), f, evals, True)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def _with_prior(table: ScoreTable, lc: LightCurve, gamma: float, scorer) -> ScoreTable:
    if scorer is None:
        raise ValueError("MAP criterion needs a period scorer")
    prior = np.array([scorer.score(lc, 1.0 / f) for f in table.grid.values])
    if gamma == 1.0:
        scores = table.scores
    elif gamma == 0.0:
        scores = prior
    else:
        scores = gamma * table.scores + (1.0 - gamma) * prior
    return ScoreTable(table.grid, scores, Criterion.MAP)


def grid_scan(lc: LightCurve, grid: FrequencyGrid, h: Hyperparams, criterion=Criterion.ML,
              scorer=None, gamma: float = 1.0) -> ScoreTable:
    """Score each grid frequency with ``beta, ell, sigma2`` of ``h`` held fixed."""
    criterion = Criterion(criterion)
    y = np.asarray(lc.mags) - np.mean(lc.mags)
    base = Criterion.CV if criterion is Criterion.CV else Criterion.ML
    table = ScoreTable(grid, gp.scan_scores(lc.times, y, grid.values, h, base), base)
    if criterion is Criterion.MAP:
        table = _with_prior(table, lc, gamma, scorer)
    return table


def _coarse_scan(lc, grid, h, cfg: SearchConfig, scorer) -> ScoreTable:
    if cfg.subsample is None:
        return grid_scan(lc, grid, h, cfg.criterion, scorer, cfg.gamma)
    base = Criterion.CV if cfg.criterion is Criterion.CV else Criterion.ML
    table = subsample_ensemble_score(lc, grid, h, cfg.subsample, base)
    if cfg.criterion is Criterion.MAP:
        table = _with_prior(table, lc, cfg.gamma, scorer)
    return table


def _fine_scan(lc, grid, h, cfg: SearchConfig, scorer) -> ScoreTable:
    if cfg.lowrank is None:
        return grid_scan(lc, grid, h, cfg.criterion, scorer, cfg.gamma)
    base = Criterion.CV if cfg.criterion is Criterion.CV else Criterion.ML
    table = epsnet_fine_scan(lc, grid, h, cfg.lowrank, base)
    if cfg.criterion is Criterion.MAP:
        table = _with_prior(table, lc, cfg.gamma, scorer)
    return table


# ---------------------------------------------------------------------------
# full algorithm
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    candidates: list[PeriodEstimate]
    hyper: Hyperparams
    coarse: ScoreTable
    fine: ScoreTable
    timings: dict = field(default_factory=dict)

    @property
    def best(self) -> PeriodEstimate:
        return self.candidates[0]


def fine_extent(cfg: SearchConfig, coarse_grid: FrequencyGrid) -> tuple[float, float]:
    """Fine-grid radius and step.

    With ``fine_cover`` the neighborhoods are widened to half the coarse step
    (same number of points each) so the fine grid reaches every frequency
    between coarse points.
    """
    radius, step = cfg.fine_radius, cfg.fine_step
    half = 0.5 * coarse_grid.step
    if cfg.fine_cover and math.isfinite(half) and half > radius:
        step *= half / radius
        radius = half
    return radius, step


def initial_hyperparams(lc: LightCurve, grid: FrequencyGrid, rng: np.random.Generator) -> Hyperparams:
    beta, ell = np.exp(rng.uniform(math.log(0.1), math.log(3.0), size=2))
    sigma2 = 0.25 * float(np.var(lc.mags))
    w = math.sqrt(grid.values[0] * grid.values[-1])
    return Hyperparams(float(beta), w, float(ell), sigma2)


def _one_run(lc: LightCurve, cfg: SearchConfig, rng, scorer, timings) -> SearchResult:
    coarse_grid = build_coarse_grid(lc, cfg)
    h = initial_hyperparams(lc, coarse_grid, rng)

    def optimize(h):
        t0 = time.perf_counter()
        res = optimize_nuisance(lc, h, cfg.max_evals)
        timings["optimize"] += time.perf_counter() - t0
        if not res.success:
            log.debug("nuisance optimization made no progress from %s", h)
        return res.hyper

    coarse = None
    for _ in range(cfg.l1):
        h = optimize(h)
        t0 = time.perf_counter()
        coarse = _coarse_scan(lc, coarse_grid, h, cfg, scorer)
        timings["coarse"] += time.perf_counter() - t0
        h = h.with_w(coarse.best_frequency())

    radius, step = fine_extent(cfg, coarse_grid)
    fine_grid = build_fine_grid(coarse.top_frequencies(cfg.top_k), radius, step)
    fine = None
    for _ in range(cfg.l2):
        h = optimize(h)
        t0 = time.perf_counter()
        fine = _fine_scan(lc, fine_grid, h, cfg, scorer)
        timings["fine"] += time.perf_counter() - t0
        h = h.with_w(fine.best_frequency())

    return SearchResult(fine.candidates(cfg.top_k), h, coarse, fine, timings)


def run_search(lc: LightCurve, cfg: SearchConfig | None = None, scorer=None) -> SearchResult:
    """Run the hybrid gradient/grid search and keep every intermediate table."""
    cfg = cfg or SearchConfig()
    if len(lc) < 10:
        raise ValueError(f"need at least 10 samples, got {len(lc)}")
    if np.ptp(lc.mags) == 0:
        raise DegenerateSeriesError("magnitudes are constant; there is no periodic signal to estimate")
    if cfg.criterion is Criterion.MAP and scorer is None:
        raise ValueError("MAP criterion needs a period scorer")
    rng = np.random.default_rng(cfg.seed)
    timings = {"optimize": 0.0, "coarse": 0.0, "fine": 0.0}
    t0 = time.perf_counter()
    best = None
    for _ in range(cfg.restarts):
        res = _one_run(lc, cfg, rng, scorer, timings)
        if best is None:
            best = res
            continue
        a, b = res.best.score, best.best.score
        if (a > b) if cfg.criterion.maximize else (a < b):
            best = res
    timings["total"] = time.perf_counter() - t0
    best.timings = timings
    return best


def estimate_period(lc: LightCurve, cfg: SearchConfig | None = None, scorer=None) -> list[PeriodEstimate]:
    """Ranked period candidates (best first) for one lightcurve."""
    return run_search(lc, cfg, scorer).candidates
