"""Synthetic corpora (harmonic and GP-sampled series) and the benchmark harness."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

from . import gp
from .baselines import baseline_estimate
from .fastpath import LowRankConfig, SubsampleConfig
from .kernel import Hyperparams, cov_matrix
from .lightcurve import Criterion, LightCurve, accuracy_hit
from .search import SearchConfig, run_search

log = logging.getLogger(__name__)

KINDS = ("harmonic", "gp", "sawtooth", "eclipsing")
N_TRUTH = 200  # dense points for the reconstruction error


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    n_series: int
    n_samples: int
    time_range: tuple[float, float] = (-5.0, 5.0)
    noise_var: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_series < 1:
            raise ValueError("n_series must be >= 1")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        lo, hi = self.time_range
        if not lo < hi:
            raise ValueError("time_range must satisfy lo < hi")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")


class SynthSeries(NamedTuple):
    lc: LightCurve
    period: float
    params: dict
    truth_t: np.ndarray  # dense evenly spaced times over the time range
    truth_f: np.ndarray  # noiseless latent function at truth_t


def _rng(spec: SynthSpec, i: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, KINDS.index(spec.kind), i])


def _times(spec: SynthSpec, rng) -> np.ndarray:
    return np.sort(rng.uniform(*spec.time_range, size=spec.n_samples))


def _dense(spec: SynthSpec) -> np.ndarray:
    return np.linspace(*spec.time_range, N_TRUTH)


def _series(spec, i, t, f, rng, period, params, truth_f) -> SynthSeries:
    y = f + rng.normal(0.0, math.sqrt(spec.noise_var), size=len(t))
    lc = LightCurve(t, y, id=f"{spec.kind}_{i:04d}")
    return SynthSeries(lc, period, params, _dense(spec), truth_f)


def harmonic_fn(params: dict, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    om = params["omega"]
    return params["a"] * np.sin(om * x + params["phi1"]) + params["b"] * np.cos(om * x + params["phi2"])


def gen_harmonic(spec: SynthSpec) -> list[SynthSeries]:
    """``a sin(wx + phi1) + b cos(wx + phi2)`` with angular ``w``; period ``2 pi / w``."""
    out = []
    for i in range(spec.n_series):
        rng = _rng(spec, i)
        a, b = rng.uniform(0.0, 5.0, size=2)
        omega = rng.uniform(1.0, 4.0)
        phi1, phi2 = rng.normal(0.0, 1.0, size=2)
        params = dict(a=float(a), b=float(b), omega=float(omega), phi1=float(phi1), phi2=float(phi2))
        t = _times(spec, rng)
        out.append(_series(spec, i, t, harmonic_fn(params, t), rng, 2.0 * math.pi / omega, params,
                           harmonic_fn(params, _dense(spec))))
    return out


def _uniform_open_low(rng, lo, hi):
    # uniform on (lo, hi]
    return hi - (hi - lo) * rng.random()


def draw_latent(h: Hyperparams, x, rng) -> np.ndarray:
    """One noiseless draw of the periodic-kernel GP at ``x`` (``1e-10 beta`` jitter)."""
    K = cov_matrix(h, np.asarray(x, dtype=float))
    K[np.diag_indices_from(K)] += 1e-10 * h.beta
    L = scipy.linalg.cholesky(K, lower=True, check_finite=False)
    return L @ rng.standard_normal(len(K))


def gen_gp(spec: SynthSpec, max_draws: int = 100) -> list[SynthSeries]:
    """Draws from the periodic-kernel GP.

    The latent function is sampled jointly at the sample times and at the
    dense truth grid; the sample-time block of the joint Cholesky factor is
    the factor of the sample-time covariance, so the observed series has
    exactly the intended distribution.
    """
    out = []
    for i in range(spec.n_series):
        rng = _rng(spec, i)
        for attempt in range(max_draws):
            beta = _uniform_open_low(rng, 0.0, 3.0)
            ell = _uniform_open_low(rng, 0.0, 3.0)
            p = _uniform_open_low(rng, 0.5, 2.5)
            t = _times(spec, rng)
            x = np.concatenate([t, _dense(spec)])
            try:
                f = draw_latent(Hyperparams(beta, 1.0 / p, ell, 1.0), x, rng)
            except np.linalg.LinAlgError:
                log.info("series %d: covariance not SPD for beta=%g ell=%g p=%g, redrawing", i, beta, ell, p)
                continue
            break
        else:
            raise RuntimeError(f"series {i}: no factorizable hyperparameter draw")
        n = len(t)
        params = dict(beta=float(beta), ell=float(ell), period=float(p))
        out.append(_series(spec, i, t, f[:n], rng, float(p), params, f[n:]))
    return out


def sawtooth_fn(params: dict, x) -> np.ndarray:
    ph = np.mod((np.asarray(x) - params["t0"]) / params["period"], 1.0)
    return params["amp"] * ph


def eclipsing_fn(params: dict, x) -> np.ndarray:
    """Flat light with two Gaussian dips per cycle (primary at phase 0, secondary at 0.5)."""
    ph = np.mod((np.asarray(x) - params["t0"]) / params["period"], 1.0)
    w = params["width"]

    def dip(center):
        d = np.mod(ph - center + 0.5, 1.0) - 0.5
        return np.exp(-0.5 * (d / w) ** 2)

    return -params["depth1"] * dip(0.0) - params["depth2"] * dip(0.5)


def gen_sawtooth(spec: SynthSpec) -> list[SynthSeries]:
    out = []
    for i in range(spec.n_series):
        rng = _rng(spec, i)
        params = dict(period=float(rng.uniform(0.5, 2.5)), amp=float(rng.uniform(1.0, 3.0)),
                      t0=float(rng.uniform(0.0, 1.0)))
        t = _times(spec, rng)
        out.append(_series(spec, i, t, sawtooth_fn(params, t), rng, params["period"], params,
                           sawtooth_fn(params, _dense(spec))))
    return out


def gen_eclipsing(spec: SynthSpec) -> list[SynthSeries]:
    """Two unequal dips per cycle; half-period aliasing is the typical failure."""
    out = []
    for i in range(spec.n_series):
        rng = _rng(spec, i)
        depth1 = float(rng.uniform(1.0, 2.0))
        params = dict(period=float(rng.uniform(0.5, 2.5)), depth1=depth1,
                      depth2=float(depth1 * rng.uniform(0.3, 0.6)), width=float(rng.uniform(0.05, 0.08)),
                      t0=float(rng.uniform(0.0, 1.0)))
        t = _times(spec, rng)
        out.append(_series(spec, i, t, eclipsing_fn(params, t), rng, params["period"], params,
                           eclipsing_fn(params, _dense(spec))))
    return out


GENERATORS = {"harmonic": gen_harmonic, "gp": gen_gp, "sawtooth": gen_sawtooth, "eclipsing": gen_eclipsing}


def generate(spec: SynthSpec) -> list[SynthSeries]:
    return GENERATORS[spec.kind](spec)


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------

@dataclass
class MethodOutput:
    period: float
    hyper: Hyperparams | None = None
    timings: dict = field(default_factory=dict)


Method = Callable[[LightCurve, int], MethodOutput]


def _gp_method(cfg: SearchConfig) -> Method:
    def run(lc, seed):
        res = run_search(lc, replace(cfg, seed=seed))
        return MethodOutput(res.best.period, res.hyper, dict(res.timings))
    return run


def _baseline_method(kind: Criterion) -> Method:
    def run(lc, seed):
        t0 = time.perf_counter()
        best = baseline_estimate(lc, kind, top_k=1)[0]
        return MethodOutput(best.period, None, {"total": time.perf_counter() - t0})
    return run


def make_method(name: str) -> Method:
    """Build a method from a name such as ``gp``, ``ls``, ``pdm`` or ``gp-cv-sub-lowrank-L5``.

    GP modifiers: ``cv`` (LOO criterion), ``sub`` (ensemble subsampling on the
    coarse scan), ``lowrank`` (epsilon-net fine scan), ``L<n>`` (``n`` cyclic
    iterations at both levels).
    """
    head, *mods = name.lower().split("-")
    if head in ("ls", "pdm"):
        if mods:
            raise ValueError(f"baseline {head!r} takes no modifiers")
        return _baseline_method(Criterion(head.upper()))
    if head != "gp":
        raise ValueError(f"unknown method {name!r}")
    kw = {}
    for m in mods:
        if m == "cv":
            kw["criterion"] = Criterion.CV
        elif m == "sub":
            kw["subsample"] = SubsampleConfig()
        elif m == "lowrank":
            kw["lowrank"] = LowRankConfig()
        elif m[:1] == "l" and m[1:].isdigit():
            kw["l1"] = kw["l2"] = int(m[1:])
        else:
            raise ValueError(f"unknown GP modifier {m!r} in {name!r}")
    return _gp_method(SearchConfig(**kw))


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def series_seed(seed: int, series: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, series, rep]).generate_state(1)[0])


def prefix_subset(n_total: int, seed: int, series: int, rep: int) -> np.ndarray:
    """Permutation whose prefixes give nested random subsets for every sample size."""
    return np.random.default_rng([seed, series, rep, 1]).permutation(n_total)


def reconstruction_rmse(lc: LightCurve, h: Hyperparams, s: SynthSeries) -> float:
    t, y, offset = gp._as_xy(lc)
    try:
        g = gp.fit(t, y, h, offset)
    except np.linalg.LinAlgError:
        return math.nan
    mean, _ = gp.predict(g, s.truth_t)
    return float(np.sqrt(np.mean((mean - s.truth_f) ** 2)))


TIMING_KEYS = ("total", "optimize", "coarse", "fine")


def _run_cell(args) -> list[dict]:
    spec, methods, sizes, reps, i, s = args
    rows = []
    for rep in reps:
        perm = prefix_subset(len(s.lc), spec.seed, i, rep)
        for n in sizes:
            lc = s.lc.subset(np.sort(perm[:n]))
            seed = series_seed(spec.seed, i, rep)
            for name in methods:
                out = make_method(name)(lc, seed)
                rmse = math.nan
                if spec.kind == "gp" and out.hyper is not None:
                    rmse = reconstruction_rmse(lc, out.hyper, s)
                row = dict(method=name, n_samples=n, repetition=rep, series=i,
                           true_period=s.period, period=out.period,
                           hit=int(accuracy_hit(out.period, s.period)), rmse=rmse)
                for k in TIMING_KEYS:
                    row[f"time_{k}"] = out.timings.get(k, math.nan)
                rows.append(row)
    return rows


@dataclass
class BenchReport:
    spec: SynthSpec
    methods: list[str]
    sizes: list[int]
    repetitions: int
    rows: list[dict]

    def cell_rows(self, method: str, n: int) -> list[dict]:
        return [r for r in self.rows if r["method"] == method and r["n_samples"] == n]

    def per_rep(self, method: str, n: int, key: str) -> np.ndarray:
        rows = self.cell_rows(method, n)
        reps = sorted({r["repetition"] for r in rows})
        return np.array([np.nanmean([r[key] for r in rows if r["repetition"] == k])
                         if any(math.isfinite(r[key]) for r in rows if r["repetition"] == k) else math.nan
                         for k in reps])

    def hit_rate(self, method: str, n: int) -> float:
        return float(np.mean(self.per_rep(method, n, "hit")))

    def total_time(self, method: str, n: int, part: str = "total") -> float:
        return float(np.nansum([r[f"time_{part}"] for r in self.cell_rows(method, n)]))

    def summary(self) -> list[dict]:
        out = []
        for m in self.methods:
            for n in self.sizes:
                hits = self.per_rep(m, n, "hit")
                rmse = self.per_rep(m, n, "rmse")
                finite = rmse[np.isfinite(rmse)]
                rows = self.cell_rows(m, n)
                out.append(dict(
                    method=m, n_samples=n,
                    hit_rate_mean=float(np.mean(hits)),
                    hit_rate_std=float(np.std(hits, ddof=1)) if len(hits) > 1 else 0.0,
                    rmse_mean=float(np.mean(finite)) if finite.size else None,
                    rmse_std=(float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0) if finite.size else None,
                    time_per_series=float(np.nanmean([r["time_total"] for r in rows])),
                ))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = list(self.rows[0].keys()) if self.rows else []
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "spec": {**self.spec.__dict__, "time_range": list(self.spec.time_range)},
            "methods": self.methods,
            "sizes": self.sizes,
            "repetitions": self.repetitions,
            "cells": self.summary(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_benchmark(spec: SynthSpec, methods: Sequence[str], sizes: Sequence[int] | None = None,
                  repetitions: int = 10, workers: int = 1,
                  series: Sequence[SynthSeries] | None = None) -> BenchReport:
    """Hit rate, reconstruction error and timing per (method, sample size).

    Each (series, repetition) draws one random permutation of the series and
    every sample size uses a prefix of it, so smaller subsets are nested in
    larger ones.
    """
    methods = list(methods)
    if not methods:
        raise ValueError("methods must be non-empty")
    for m in methods:
        make_method(m)
    sizes = sorted(set(sizes or [spec.n_samples]))
    if sizes[0] < 10 or sizes[-1] > spec.n_samples:
        raise ValueError(f"sample sizes must lie in [10, {spec.n_samples}]")
    if series is None:
        series = generate(spec)
    reps = list(range(repetitions))
    jobs = [(spec, methods, sizes, reps, i, s) for i, s in enumerate(series)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_cell, jobs))
    else:
        parts = [_run_cell(j) for j in jobs]
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: (methods.index(r["method"]), r["n_samples"], r["repetition"], r["series"]))
    return BenchReport(spec, methods, sizes, repetitions, rows)
