"""Dense symmetric linear algebra used by the GP scores.

Factorization, triangular solves and the symmetric eigensolver are thin
wrappers over LAPACK. The rank-one Cholesky up/downdate is implemented here
(O(N^2) per update, compiled with numba).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    L: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.L @ self.L.T


@dataclass(frozen=True, eq=False)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


def cholesky(A) -> CholeskyFactor:
    A = np.asarray(A, dtype=float)
    try:
        L = scipy.linalg.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefiniteError("non-finite factor")
    return CholeskyFactor(L)


@numba.njit(cache=True)
def _choldate_upper(U, x, sign):
    """In-place update of the upper factor ``U`` (``A = U^T U``) to ``A + sign x x^T``.

    Works on rows of ``U`` so the inner loops are contiguous. ``x`` is
    overwritten. Returns False if a downdate loses positive definiteness.
    """
    n = U.shape[0]
    for k in range(n):
        ukk = U[k, k]
        xk = x[k]
        r2 = ukk * ukk + sign * xk * xk
        if not r2 > 0.0:
            return False
        r = np.sqrt(r2)
        c = r / ukk
        s = xk / ukk
        U[k, k] = r
        for i in range(k + 1, n):
            u = (U[k, i] + sign * s * x[i]) / c
            U[k, i] = u
            x[i] = c * x[i] - s * u
    return True


@numba.njit(cache=True)
def _choldate_many(U, V, signs):
    """Apply the updates ``sign_m v_m v_m^T`` for each row ``v_m`` of ``V``."""
    x = np.empty(U.shape[0])
    for m in range(V.shape[0]):
        if signs[m] == 0.0:
            continue
        for i in range(x.shape[0]):
            x[i] = V[m, i]
        if not _choldate_upper(U, x, signs[m]):
            return False
    return True


def rank_one_update(f: CholeskyFactor, v, sign: int = 1) -> CholeskyFactor:
    """Factor of ``L L^T + sign v v^T`` via Givens (hyperbolic for downdates) rotations."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    v = np.asarray(v, dtype=float)
    if v.shape != (f.n,):
        raise ValueError(f"vector of length {v.shape} does not match factor of size {f.n}")
    U = np.array(f.L.T, order="C")  # always a copy; scipy factors may be Fortran-ordered
    if not _choldate_upper(U, v.copy(), float(sign)):
        raise NotPositiveDefiniteError("downdate breaks positive definiteness")
    return CholeskyFactor(np.ascontiguousarray(U.T))


def _check_dims(f: CholeskyFactor, b: np.ndarray):
    if b.shape[0] != f.n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, factor is {f.n}x{f.n}")


def solve_lower(f: CholeskyFactor, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    _check_dims(f, b)
    return scipy.linalg.solve_triangular(f.L, b, lower=True, check_finite=False)


def solve_system(f: CholeskyFactor, b) -> np.ndarray:
    """Solve ``L L^T x = b``."""
    b = np.asarray(b, dtype=float)
    _check_dims(f, b)
    return scipy.linalg.cho_solve((f.L, True), b, check_finite=False)


def inverse(f: CholeskyFactor) -> np.ndarray:
    return solve_system(f, np.eye(f.n))


def logdet(f: CholeskyFactor) -> float:
    return float(2.0 * np.sum(np.log(np.diag(f.L))))


def sym_eigen(A) -> EigenPairs:
    """Full eigendecomposition, ordered by decreasing ``|lambda|``."""
    A = np.asarray(A, dtype=float)
    asym = np.max(np.abs(A - A.T)) if A.size else 0.0
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    A = 0.5 * (A + A.T)
    try:
        vals, vecs = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition did not converge: {exc}") from None
    order = np.argsort(-np.abs(vals), kind="stable")
    return EigenPairs(vals[order], np.ascontiguousarray(vecs[:, order]))
