"""Command-line interface: ``fit``, ``batch``, ``synth`` and ``eval``.

Settings come from defaults, then an optional INI file (``--config``), then
flags. Flag names match config keys one-to-one (``top_k`` <-> ``--top-k``).
Exit codes: 0 success, 2 usage or input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import baseline_estimate, default_grid, lomb_scargle, pdm
from .fastpath import LowRankConfig, SubsampleConfig
from .lightcurve import Criterion, LightCurve, LightCurveError, accuracy_hit, dump_lightcurve, fold, load_lightcurve
from .priors import ReferenceScorer, combine_methods, double_period_filter, filter_select
from .search import DegenerateSeriesError, SearchConfig, run_search
from .synth import KINDS, SynthSpec, generate, run_benchmark

log = logging.getLogger("gpperiod")

SCHEMA_VERSION = 1
METHODS = ("gp", "ls", "pdm", "gp+ls")
FILTERS = ("none", "filter", "double", "combine")


class UsageError(Exception):
    """Bad arguments, configuration or input data (exit code 2)."""


# (section, key, type, default, help); the flag is --key with dashes
OPTIONS = [
    ("run", "method", str, "gp", "gp, ls, pdm or gp+ls"),
    ("run", "seed", int, 0, "random seed"),
    ("run", "out", str, None, "output directory"),
    ("run", "workers", int, 1, "parallel worker processes (batch, eval)"),
    ("run", "format", str, "whitespace", "lightcurve format: whitespace or csv"),
    ("search", "criterion", str, "ml", "ml, cv or map"),
    ("search", "l1", int, 2, "coarse cyclic iterations"),
    ("search", "l2", int, 2, "fine cyclic iterations"),
    ("search", "top_k", int, 10, "candidates kept after the coarse scan"),
    ("search", "oversample", int, 8, "coarse grid oversampling factor"),
    ("search", "coarse_range", str, None, "explicit coarse grid 'lo,hi,step'"),
    ("search", "fine_radius", float, 0.001, "fine neighborhood radius"),
    ("search", "fine_step", float, 0.0001, "fine grid step"),
    ("search", "fine_cover", bool, True, "widen fine neighborhoods to cover the coarse step"),
    ("search", "restarts", int, 1, "independent restarts"),
    ("search", "max_evals", int, 100, "function evaluations per optimizer call"),
    ("subsample", "subsample", bool, False, "ensemble subsampling on the coarse scan"),
    ("subsample", "fraction", float, 0.15, "subset fraction"),
    ("subsample", "repetitions", int, 10, "number of subsets"),
    ("subsample", "min_points", int, 30, "minimum subset size"),
    ("subsample", "max_points", int, 40, "maximum subset size"),
    ("lowrank", "lowrank", bool, False, "low-rank shifted fine scan"),
    ("lowrank", "rank", int, None, "rank of the shift (default N/2)"),
    ("lowrank", "epsilon", float, 0.005, "epsilon-net radius"),
    ("prior", "gamma", float, 1.0, "weight of the GP evidence in the MAP score"),
    ("prior", "filter", str, "none", "none, filter, double or combine"),
    ("prior", "n_harmonics", int, 3, "harmonics of the reference period scorer"),
]
_SECTION = {key: sec for sec, key, *_ in OPTIONS}


def _coerce(key: str, typ, raw):
    if raw is None or isinstance(raw, typ) and not isinstance(raw, str):
        return raw
    s = str(raw).strip()
    try:
        if typ is bool:
            return configparser.ConfigParser.BOOLEAN_STATES[s.lower()]
        if s.lower() in ("", "none") and typ is not str:
            return None
        return typ(s)
    except (KeyError, ValueError):
        raise UsageError(f"invalid value for {key}: {raw!r}") from None


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for _, k, _, d, _ in OPTIONS})

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @classmethod
    def from_sources(cls, path: str | None = None, flags: dict | None = None) -> "RunConfig":
        cfg = cls()
        types = {k: t for _, k, t, _, _ in OPTIONS}
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise UsageError(f"config file not found: {path}")
            parser = configparser.ConfigParser()
            try:
                parser.read(p, encoding="utf-8")
            except configparser.Error as e:
                raise UsageError(f"{path}: {e}") from None
            for sec in parser.sections():
                for key, raw in parser.items(sec):
                    key = {"enabled": sec}.get(key, key)
                    if key not in types or _SECTION[key] != sec:
                        raise UsageError(f"{path}: unknown key [{sec}] {key}")
                    cfg.values[key] = _coerce(key, types[key], raw)
        for key, val in (flags or {}).items():
            if key in types and val is not None:
                cfg.values[key] = _coerce(key, types[key], val)
        cfg.validate()
        return cfg

    def validate(self):
        if self.method not in METHODS:
            raise UsageError(f"method must be one of {METHODS}")
        if self.filter not in FILTERS:
            raise UsageError(f"filter must be one of {FILTERS}")
        if self.criterion not in ("ml", "cv", "map"):
            raise UsageError("criterion must be ml, cv or map")
        if self.format not in ("whitespace", "csv"):
            raise UsageError("format must be whitespace or csv")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        try:
            self.search_config()
            self.scorer()
        except ValueError as e:
            raise UsageError(str(e)) from None

    def search_config(self) -> SearchConfig:
        rng = None
        if self.coarse_range:
            try:
                rng = tuple(float(v) for v in self.coarse_range.split(","))
            except ValueError:
                rng = ()
            if len(rng) != 3:
                raise ValueError("coarse_range must be 'lo,hi,step'")
        sub = low = None
        if self.subsample:
            sub = SubsampleConfig(self.fraction, self.repetitions, self.min_points, self.max_points, self.seed)
        if self.lowrank:
            low = LowRankConfig(self.rank, self.epsilon)
        return SearchConfig(
            criterion=Criterion(self.criterion.upper()), l1=self.l1, l2=self.l2, top_k=self.top_k,
            oversample=self.oversample, coarse_range=rng, fine_radius=self.fine_radius,
            fine_step=self.fine_step, fine_cover=self.fine_cover, restarts=self.restarts, seed=self.seed,
            max_evals=self.max_evals, gamma=self.gamma, subsample=sub, lowrank=low,
        )

    def scorer(self) -> ReferenceScorer:
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        return ReferenceScorer(self.n_harmonics)


# ---------------------------------------------------------------------------
# single-series pipeline
# ---------------------------------------------------------------------------

def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _cand(c) -> dict:
    d = c.to_dict()
    d["score"] = _num(d["score"])
    return d


@dataclass
class FitOutcome:
    doc: dict
    table: tuple[np.ndarray, np.ndarray] | None  # (frequencies, scores) of the last scan


def fit_series(lc: LightCurve, rc: RunConfig) -> FitOutcome:
    t0 = time.perf_counter()
    timing = {}
    scorer = rc.scorer()
    if np.ptp(lc.mags) == 0:
        raise DegenerateSeriesError("magnitudes are constant; there is no periodic signal to estimate")
    use_gp = rc.method in ("gp", "gp+ls") or rc.filter == "combine"
    if use_gp and len(lc) < 10:
        raise UsageError(f"{lc.id}: the GP search needs at least 10 samples, got {len(lc)}")
    gp_c = ls_c = pdm_c = None
    table = None
    if use_gp:
        res = run_search(lc, rc.search_config(), scorer)
        gp_c = res.candidates
        timing.update({k: v for k, v in res.timings.items() if k != "total"})
        if rc.method != "ls":
            table = (res.fine.grid.values, res.fine.scores)
    if rc.method in ("ls", "gp+ls") or rc.filter == "combine":
        ls_c = baseline_estimate(lc, Criterion.LS, top_k=rc.top_k)
        if rc.method == "ls":
            grid = default_grid(lc, Criterion.LS, rc.oversample)
            table = (grid.values, lomb_scargle(lc, grid).power)
    if rc.method == "pdm":
        pdm_c = baseline_estimate(lc, Criterion.PDM, top_k=rc.top_k)
        grid = default_grid(lc, Criterion.PDM)
        table = (grid.values, pdm(lc, grid).power)

    cands = {"gp": gp_c, "ls": ls_c, "pdm": pdm_c, "gp+ls": (gp_c or []) + (ls_c or [])}[rc.method]
    if rc.filter == "none":
        chosen = cands[0]
    elif rc.filter == "filter":
        chosen = filter_select(lc, cands, scorer)
    elif rc.filter == "double":
        chosen = double_period_filter(lc, cands, scorer)
    else:
        chosen = combine_methods(lc, gp_c, ls_c, scorer)
    timing["total"] = time.perf_counter() - t0
    doc = {
        "schema_version": SCHEMA_VERSION,
        "id": lc.id,
        "method": rc.method,
        "criterion": rc.criterion,
        "filter": rc.filter,
        "seed": rc.seed,
        "n_samples": len(lc),
        "candidates": [_cand(c) for c in cands],
        "chosen": _cand(chosen),
        "timing": timing,
    }
    return FitOutcome(doc, table)


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, allow_nan=False)


def _write_csv(path: Path, header: str, cols):
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in zip(*cols)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load(path: str, rc: RunConfig) -> LightCurve:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"cannot read lightcurve: {path}: no such file")
    try:
        return load_lightcurve(p, rc.format, id=p.stem)
    except UnicodeDecodeError:
        raise UsageError(f"{path}: not a text file") from None
    except LightCurveError as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_fit(args, rc: RunConfig) -> int:
    lc = _load(args.input, rc)
    out = fit_series(lc, rc)
    text = _dumps(out.doc) + "\n"
    if rc.out is None:
        sys.stdout.write(text)
        return 0
    d = Path(rc.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{lc.id}.json").write_text(text, encoding="utf-8")
    pc = fold(lc, out.doc["chosen"]["period"])
    _write_csv(d / f"{lc.id}_folded.csv", "phase,mag", (pc.phases, pc.mags))
    if out.table is not None:
        f, s = out.table
        _write_csv(d / f"{lc.id}_scores.csv", "frequency,score", (f, s))
    return 0


# ---------------------------------------------------------------------------
# batch
# ---------------------------------------------------------------------------

def read_manifest(path: str) -> list[tuple[str, float | None]]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"cannot read manifest: {path}: no such file")
    rows = []
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) > 2:
            raise UsageError(f"{path}: line {lineno}: expected 'path [true_period]'")
        truth = None
        if len(parts) == 2:
            try:
                truth = float(parts[1])
            except ValueError:
                raise UsageError(f"{path}: line {lineno}: bad period {parts[1]!r}") from None
            if not truth > 0:
                raise UsageError(f"{path}: line {lineno}: period must be positive")
        series = Path(parts[0])
        if not series.is_absolute():
            series = p.parent / series
        rows.append((str(series), truth))
    return rows


def _batch_one(job) -> dict:
    path, shown, truth, rc = job
    rec = {"path": shown, "true_period": truth}
    try:
        out = fit_series(_load(path, rc), rc)
    except (UsageError, ValueError) as e:
        rec["error"] = str(e)
        return rec
    rec.update(out.doc)
    if truth is not None:
        rec["hit"] = bool(accuracy_hit(out.doc["chosen"]["period"], truth))
    return rec


def cmd_batch(args, rc: RunConfig) -> int:
    rows = read_manifest(args.manifest)
    if not rows:
        raise UsageError(f"manifest {args.manifest} lists no series")
    t0 = time.perf_counter()
    # paths are reported relative to the manifest so outputs do not depend on where it lives
    base = Path(args.manifest).parent
    jobs = [(p, os.path.relpath(p, base), t, rc) for p, t in rows]
    if rc.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(rc.workers, len(jobs))) as ex:
            recs = list(ex.map(_batch_one, jobs))
    else:
        recs = [_batch_one(j) for j in jobs]
    scored = [r["hit"] for r in recs if "hit" in r]
    n_fail = sum("error" in r for r in recs)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "summary": True,
        "n_series": len(recs),
        "n_ok": len(recs) - n_fail,
        "n_failed": n_fail,
        "n_scored": len(scored),
        "hit_rate": (sum(scored) / len(scored)) if scored else None,
        "timing": {"total": time.perf_counter() - t0},
    }
    lines = "".join(_dumps(r) + "\n" for r in recs)
    if rc.out is None:
        sys.stdout.write(lines + _dumps(summary) + "\n")
    else:
        d = Path(rc.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "batch.jsonl").write_text(lines, encoding="utf-8")
        (d / "summary.json").write_text(_dumps(summary) + "\n", encoding="utf-8")
    for r in recs:
        if "error" in r:
            log.warning("%s: %s", r["path"], r["error"])
    return 1 if n_fail == len(recs) else 0


# ---------------------------------------------------------------------------
# synth / eval
# ---------------------------------------------------------------------------

def _spec(args, rc: RunConfig) -> SynthSpec:
    try:
        return SynthSpec(args.kind, args.n_series, args.n_samples, (args.t_min, args.t_max),
                         args.noise_var, rc.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_synth(args, rc: RunConfig) -> int:
    spec = _spec(args, rc)
    if rc.out is None:
        raise UsageError("synth needs --out DIR")
    d = Path(rc.out)
    d.mkdir(parents=True, exist_ok=True)
    rows = ["# path true_period"]
    for s in generate(spec):
        name = f"{s.lc.id}.dat"
        (d / name).write_text(dump_lightcurve(s.lc), encoding="utf-8")
        rows.append(f"{name} {s.period!r}")
    (d / "manifest.txt").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return 0


def cmd_eval(args, rc: RunConfig) -> int:
    spec = _spec(args, rc)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    try:
        sizes = [int(v) for v in args.sizes.split(",")] if args.sizes else [spec.n_samples]
        report = run_benchmark(spec, methods, sizes, args.reps, rc.workers)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if rc.out is None:
        sys.stdout.write(report.to_json())
        return 0
    d = Path(rc.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (d / "report.json").write_text(report.to_json(), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file with [run], [search], [subsample], [lowrank], [prior] sections")
    for sec, key, typ, default, hlp in OPTIONS:
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None,
                           help=f"{hlp} (default {default})")
        else:
            p.add_argument(flag, dest=key, default=None, help=f"{hlp} (default {default})")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_spec(p: argparse.ArgumentParser):
    p.add_argument("--kind", choices=KINDS, default="gp")
    p.add_argument("--n-series", type=int, default=50)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--noise-var", type=float, default=0.1)
    p.add_argument("--t-min", type=float, default=-5.0)
    p.add_argument("--t-max", type=float, default=5.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpperiod", description="Period estimation with periodic-kernel GPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate the period of one lightcurve")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("batch", help="run fit over every series in a manifest")
    p.add_argument("manifest", help="lines of 'path [true_period]'")
    _add_common(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("synth", help="write a synthetic corpus and its truth manifest")
    _add_spec(p)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="benchmark methods on a synthetic corpus")
    _add_spec(p)
    p.add_argument("--methods", default="gp,ls,pdm", help="comma-separated method names")
    p.add_argument("--sizes", default=None, help="comma-separated sample sizes (default n-samples)")
    p.add_argument("--reps", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = RunConfig.from_sources(args.config, vars(args))
        return args.func(args, rc)
    except (UsageError, DegenerateSeriesError) as e:
        print(f"gpperiod: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"gpperiod: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
