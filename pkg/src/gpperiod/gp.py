"""GP model-selection scores: log marginal likelihood, its gradient, LOO-CV error and prediction.

Magnitudes are centered on their sample mean before scoring (the GP prior has
zero mean); :func:`predict` adds the mean back.

The ``scan_*`` functions evaluate a score over many frequencies with the
other hyperparameters fixed. They run in compiled loops and are what the
grid searches use; the dense functions above them are the reference path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg

from .kernel import PARAMS, Hyperparams, cov_matrix
from .lightcurve import LightCurve
from .linalg import CholeskyFactor, NotPositiveDefiniteError, cholesky, inverse, solve_lower

LOG_2PI = math.log(2.0 * math.pi)
JITTER = 1e-8


@dataclass(frozen=True, eq=False)
class GpFit:
    hyper: Hyperparams
    times: np.ndarray
    y: np.ndarray
    chol: CholeskyFactor
    alpha: np.ndarray
    lml: float
    offset: float = 0.0


def _as_xy(lc) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(lc, LightCurve):
        offset = float(np.mean(lc.mags))
        return np.asarray(lc.times), np.asarray(lc.mags) - offset, offset
    t, y = lc
    return np.asarray(t, dtype=float), np.asarray(y, dtype=float), 0.0


def _factor_gram(h: Hyperparams, times) -> CholeskyFactor:
    K = cov_matrix(h, times)
    K[np.diag_indices_from(K)] += h.sigma2
    try:
        return cholesky(K)
    except NotPositiveDefiniteError:
        K[np.diag_indices_from(K)] += JITTER * h.beta
        return cholesky(K)


def fit(times, y, h: Hyperparams, offset: float = 0.0) -> GpFit:
    """Factor ``K + sigma2 I`` for raw (already centered) targets.

    Raises :class:`NotPositiveDefiniteError` when the matrix is not SPD even
    after one jitter retry.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    f = _factor_gram(h, times)
    z = solve_lower(f, y)
    alpha = scipy.linalg.solve_triangular(f.L.T, z, lower=False, check_finite=False)
    lml = -0.5 * float(z @ z) - float(np.sum(np.log(np.diag(f.L)))) - 0.5 * len(y) * LOG_2PI
    return GpFit(h, times, y, f, alpha, lml, offset)


def log_marginal_likelihood(lc, h: Hyperparams) -> tuple[float, GpFit | None]:
    """Log evidence of the (centered) series; ``-inf`` and ``None`` if the point is rejected."""
    t, y, offset = _as_xy(lc)
    try:
        g = fit(t, y, h, offset)
    except NotPositiveDefiniteError:
        return -math.inf, None
    return g.lml, g


def value_and_grad(times, y, h: Hyperparams) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient w.r.t. (beta, w, ell, sigma2)."""
    g = fit(times, y, h)
    Kinv = inverse(g.chol)
    W = np.outer(g.alpha, g.alpha) - Kinv
    d = g.times[:, None] - g.times[None, :]
    arg = h.w * np.pi * d
    s = np.sin(arg)
    K = h.beta * np.exp(-2.0 * s * s / h.ell ** 2)
    WK = W * K
    grad = np.array([
        0.5 * np.sum(WK) / h.beta,
        0.5 * np.sum(WK * (-4.0 * np.pi * d * s * np.cos(arg))) / h.ell ** 2,
        0.5 * np.sum(WK * (s * s)) * 4.0 / h.ell ** 3,
        0.5 * np.trace(W),
    ])
    return g.lml, grad


def fisher_diag_log(times, y, h: Hyperparams) -> np.ndarray:
    """Diagonal of the Fisher information w.r.t. the log-hyperparameters."""
    g = fit(times, y, h)
    Kinv = inverse(g.chol)
    d = g.times[:, None] - g.times[None, :]
    arg = h.w * np.pi * d
    s = np.sin(arg)
    K = h.beta * np.exp(-2.0 * s * s / h.ell ** 2)
    dks = (
        K,
        K * (-4.0 * np.pi * d * s * np.cos(arg) * h.w / h.ell ** 2),
        K * (4.0 * s * s / h.ell ** 2),
    )
    out = []
    for dk in dks:
        A = Kinv @ dk
        out.append(0.5 * np.sum(A * A.T))
    out.append(0.5 * h.sigma2 ** 2 * np.sum(Kinv * Kinv))
    return np.array(out)


def lml_gradient(lc, h: Hyperparams) -> np.ndarray:
    """Gradient of the log marginal likelihood; ``nan`` entries if the point is rejected."""
    t, y, _ = _as_xy(lc)
    try:
        return value_and_grad(t, y, h)[1]
    except NotPositiveDefiniteError:
        return np.full(len(PARAMS), np.nan)


def loo_residuals(lc, h: Hyperparams) -> np.ndarray:
    """Closed-form leave-one-out residuals ``y_i - f_{-i}(x_i)``."""
    t, y, _ = _as_xy(lc)
    f = _factor_gram(h, t)
    Linv = solve_lower(f, np.eye(f.n))
    alpha = Linv.T @ (Linv @ y)
    diag = np.einsum("ki,ki->i", Linv, Linv)
    return alpha / diag


def loo_cv_error(lc, h: Hyperparams) -> float:
    """Sum of squared LOO residuals (lower is better); ``+inf`` if rejected."""
    try:
        r = loo_residuals(lc, h)
    except NotPositiveDefiniteError:
        return math.inf
    return float(r @ r)


def predict(fit: GpFit, lc=None, xstar=None) -> tuple[np.ndarray, np.ndarray]:
    """Posterior predictive mean and variance of the latent function at ``xstar``."""
    if xstar is None:
        lc, xstar = None, lc
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    h = fit.hyper
    Ks = cov_matrix(h, fit.times, xstar)
    mean = Ks.T @ fit.alpha + fit.offset
    v = solve_lower(fit.chol, Ks)
    var = h.beta - np.einsum("ij,ij->j", v, v)
    var = np.where(var < 0, 0.0, var)
    return mean, var


# ---------------------------------------------------------------------------
# compiled scans
# ---------------------------------------------------------------------------

CODE_ML = 0
CODE_CV = 1


@numba.njit(cache=True)
def _fill_lower(t, w, beta, ell, s2, jitter, L, S, C):
    # sin(a_i - a_j) by angle addition: 2N transcendentals instead of N^2/2
    n = t.shape[0]
    c = -2.0 / (ell * ell)
    for i in range(n):
        a = np.pi * w * t[i]
        S[i] = np.sin(a)
        C[i] = np.cos(a)
    for i in range(n):
        si = S[i]
        ci = C[i]
        for j in range(i):
            s = si * C[j] - ci * S[j]
            L[i, j] = beta * np.exp(c * s * s)
        L[i, i] = beta + s2 + jitter


@numba.njit(cache=True)
def _chol_lower(L):
    n = L.shape[0]
    for j in range(n):
        d = L[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if not d > 0.0:
            return False
        d = np.sqrt(d)
        L[j, j] = d
        for i in range(j + 1, n):
            acc = L[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / d
    return True


@numba.njit(cache=True)
def _factor(t, w, beta, ell, s2, L, S, C):
    _fill_lower(t, w, beta, ell, s2, 0.0, L, S, C)
    if _chol_lower(L):
        return True
    _fill_lower(t, w, beta, ell, s2, 1e-8 * beta, L, S, C)
    return _chol_lower(L)


@numba.njit(cache=True)
def _lml_from_lower(L, y, z):
    n = y.shape[0]
    q = 0.0
    ld = 0.0
    for i in range(n):
        acc = y[i]
        for k in range(i):
            acc -= L[i, k] * z[k]
        z[i] = acc / L[i, i]
        q += z[i] * z[i]
        ld += np.log(L[i, i])
    return -0.5 * q - ld - 0.5 * n * np.log(2.0 * np.pi)


@numba.njit(cache=True)
def _cv_from_lower(L, y, z, X):
    # X = L^{-1}; diag(K^{-1})_i = sum_k X[k, i]^2 ; alpha = X^T X y
    n = y.shape[0]
    for j in range(n):
        for i in range(n):
            X[i, j] = 0.0
        X[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            acc = 0.0
            for k in range(j, i):
                acc += L[i, k] * X[k, j]
            X[i, j] = -acc / L[i, i]
    for i in range(n):
        acc = 0.0
        for k in range(i + 1):
            acc += X[i, k] * y[k]
        z[i] = acc
    total = 0.0
    for i in range(n):
        a = 0.0
        d = 0.0
        for k in range(i, n):
            a += X[k, i] * z[k]
            d += X[k, i] * X[k, i]
        r = a / d
        total += r * r
    return total


@numba.njit(cache=True)
def _score_lower(L, y, z, X, code):
    if code == 0:
        return _lml_from_lower(L, y, z)
    return _cv_from_lower(L, y, z, X)


@numba.njit(cache=True)
def _scan(t, y, freqs, beta, ell, s2, code):
    n = t.shape[0]
    L = np.empty((n, n))
    X = np.empty((n, n)) if code == 1 else np.empty((1, 1))
    S = np.empty(n)
    C = np.empty(n)
    z = np.empty(n)
    bad = -np.inf if code == 0 else np.inf
    out = np.empty(freqs.shape[0])
    for k in range(freqs.shape[0]):
        if _factor(t, freqs[k], beta, ell, s2, L, S, C):
            out[k] = _score_lower(L, y, z, X, code)
        else:
            out[k] = bad
    return out


@numba.njit(cache=True)
def _scan_ensemble(T, Y, freqs, beta, ell, s2, code):
    R, n = T.shape
    L = np.empty((n, n))
    X = np.empty((n, n)) if code == 1 else np.empty((1, 1))
    S = np.empty(n)
    C = np.empty(n)
    z = np.empty(n)
    bad = -np.inf if code == 0 else np.inf
    out = np.empty(freqs.shape[0])
    for k in range(freqs.shape[0]):
        acc = 0.0
        for r in range(R):
            if _factor(T[r], freqs[k], beta, ell, s2, L, S, C):
                acc += _score_lower(L, Y[r], z, X, code)
            else:
                acc = bad
                break
        out[k] = acc / R if np.isfinite(acc) else acc
    return out


def _centered_times(times) -> np.ndarray:
    # keeps the phase arguments small for the angle-addition kernel fill
    t = np.ascontiguousarray(times, dtype=float)
    return t - 0.5 * (t[0] + t[-1])


def _code(criterion) -> int:
    c = str(getattr(criterion, "value", criterion)).upper()
    if c == "ML":
        return CODE_ML
    if c == "CV":
        return CODE_CV
    raise ValueError(f"criterion {criterion!r} has no compiled scan")


def scan_scores(times, y, freqs, h: Hyperparams, criterion="ML") -> np.ndarray:
    """Score every frequency in ``freqs`` with ``beta, ell, sigma2`` from ``h``."""
    return _scan(_centered_times(times), np.ascontiguousarray(y, dtype=float),
                 np.ascontiguousarray(freqs, dtype=float), h.beta, h.ell, h.sigma2, _code(criterion))


def scan_ensemble_scores(times_sets, y_sets, freqs, h: Hyperparams, criterion="ML") -> np.ndarray:
    """Mean score over equally sized subsets (rows of ``times_sets``/``y_sets``)."""
    T = np.array([_centered_times(t) for t in times_sets])
    Y = np.ascontiguousarray(y_sets, dtype=float)
    return _scan_ensemble(T, Y, np.ascontiguousarray(freqs, dtype=float),
                          h.beta, h.ell, h.sigma2, _code(criterion))
