"""Irregularly sampled lightcurves: loading, folding and the period accuracy metric."""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np


class LightCurveError(ValueError):
    """Raised for malformed or unusable lightcurve input."""


class Criterion(str, enum.Enum):
    ML = "ML"
    CV = "CV"
    MAP = "MAP"
    LS = "LS"
    PDM = "PDM"
    FILTER = "FILTER"

    @property
    def maximize(self) -> bool:
        # CV (LOO error) and PDM (dispersion) are minimized; everything else is a log-score.
        return self not in (Criterion.CV, Criterion.PDM)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LightCurve:
    times: np.ndarray
    mags: np.ndarray
    errs: np.ndarray | None = None
    id: str = ""

    def __post_init__(self):
        times = _frozen(self.times)
        mags = _frozen(self.mags)
        if times.ndim != 1 or mags.shape != times.shape:
            raise LightCurveError("times and mags must be 1-d arrays of equal length")
        if len(times) < 2:
            raise LightCurveError("a lightcurve needs at least 2 samples")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(mags))):
            raise LightCurveError("times and mags must be finite")
        if np.any(np.diff(times) <= 0):
            raise LightCurveError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mags", mags)
        if self.errs is not None:
            errs = _frozen(self.errs)
            if errs.shape != times.shape or not np.all(np.isfinite(errs)):
                raise LightCurveError("errs must be finite and match times")
            object.__setattr__(self, "errs", errs)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def from_unsorted(cls, times, mags, errs=None, id: str = "") -> "LightCurve":
        """Sort by time and build; duplicate timestamps are rejected."""
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind="stable")
        errs = None if errs is None else np.asarray(errs, dtype=float)[order]
        t = times[order]
        dup = np.flatnonzero(np.diff(t) == 0)
        if dup.size:
            raise LightCurveError(f"duplicate timestamp {t[dup[0]]!r}")
        return cls(t, np.asarray(mags, dtype=float)[order], errs, id)

    def subset(self, index) -> "LightCurve":
        index = np.sort(np.asarray(index))
        errs = None if self.errs is None else self.errs[index]
        return LightCurve(self.times[index], self.mags[index], errs, self.id)


@dataclass(frozen=True, eq=False)
class PhasedCurve:
    phases: np.ndarray
    mags: np.ndarray
    period: float


@dataclass(frozen=True)
class PeriodEstimate:
    frequency: float
    score: float
    criterion: Criterion
    rank: int = 1
    degenerate: bool = False  # no finite preference among candidates
    period: float = field(init=False)

    def __post_init__(self):
        if not (self.frequency > 0 and math.isfinite(self.frequency)):
            raise ValueError(f"frequency must be positive, got {self.frequency}")
        object.__setattr__(self, "period", 1.0 / self.frequency)
        object.__setattr__(self, "criterion", Criterion(self.criterion))

    @classmethod
    def from_period(cls, period: float, score: float, criterion, rank: int = 1,
                    degenerate: bool = False) -> "PeriodEstimate":
        est = cls(1.0 / period, score, criterion, rank, degenerate)
        # keep the caller's period exactly (e.g. doubled periods)
        object.__setattr__(est, "period", float(period))
        return est

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "frequency": self.frequency,
            "period": self.period,
            "score": self.score,
            "criterion": self.criterion.value,
            "degenerate": self.degenerate,
        }


CandidateList = list  # list[PeriodEstimate], ordered by rank


def rank_candidates(freqs: Sequence[float], scores: Sequence[float], criterion,
                    periods: Sequence[float] | None = None) -> list[PeriodEstimate]:
    """Order candidates best-first; ties go to the lower frequency."""
    criterion = Criterion(criterion)
    freqs = np.asarray(freqs, dtype=float)
    scores = np.asarray(scores, dtype=float)
    key = -scores if criterion.maximize else scores
    # NaN sorts last
    key = np.where(np.isnan(key), np.inf, key)
    order = np.lexsort((freqs, key))
    out = []
    for r, i in enumerate(order, start=1):
        if periods is None:
            out.append(PeriodEstimate(float(freqs[i]), float(scores[i]), criterion, r))
        else:
            out.append(PeriodEstimate.from_period(float(periods[i]), float(scores[i]), criterion, r))
    return out


def _parse_lines(lines: Iterable[str], fmt: str):
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",") if fmt == "csv" else line.replace(",", " ").split()
        parts = [p.strip() for p in parts if p.strip() != ""]
        if len(parts) not in (2, 3):
            raise LightCurveError(f"line {lineno}: expected 2 or 3 columns, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise LightCurveError(f"line {lineno}: non-numeric value in {line!r}") from None
        if not all(math.isfinite(v) for v in vals):
            continue
        rows.append(vals)
    return rows


def load_lightcurve(source, format: str = "whitespace", id: str = "") -> LightCurve:
    """Read a lightcurve from bytes, text, a path or an open stream.

    Each data line holds ``time mag [err]``; ``#`` starts a comment line.
    Rows with non-finite values are dropped. The result is sorted by time.
    """
    if format not in ("whitespace", "csv"):
        raise ValueError(f"unknown format {format!r}")
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        id = id or str(source)
    rows = _parse_lines(io.StringIO(text), format)
    if len(rows) < 2:
        raise LightCurveError(f"need at least 2 valid rows, found {len(rows)}")
    ncols = {len(r) for r in rows}
    arr = np.array([r[:2] + [r[2] if len(r) == 3 else np.nan] for r in rows])
    errs = arr[:, 2] if ncols == {3} else None
    return LightCurve.from_unsorted(arr[:, 0], arr[:, 1], errs, id)


def dump_lightcurve(lc: LightCurve, stream: IO[str] | None = None, fmt: str = "whitespace") -> str:
    """Serialize with ``repr`` precision so load/dump round-trips exactly."""
    sep = "," if fmt == "csv" else " "
    cols = [lc.times, lc.mags] + ([lc.errs] if lc.errs is not None else [])
    lines = [sep.join(repr(float(c[i])) for c in cols) for i in range(len(lc))]
    text = "\n".join(lines) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def fold(lc: LightCurve, period: float) -> PhasedCurve:
    """Fold at ``period`` with phase origin at the first timestamp, sorted by phase."""
    if not period > 0:
        raise ValueError(f"period must be positive, got {period}")
    phases = np.mod((lc.times - lc.times[0]) / period, 1.0)
    phases[phases >= 1.0] = 0.0
    order = np.argsort(phases, kind="stable")
    return PhasedCurve(phases[order], lc.mags[order].copy(), float(period))


def accuracy_hit(p_hat: float, p_true: float, tol: float = 0.01) -> bool:
    if not p_true > 0:
        raise ValueError("p_true must be positive")
    return abs(p_hat - p_true) / p_true <= tol
