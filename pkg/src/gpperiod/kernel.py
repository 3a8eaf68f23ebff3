"""Periodic covariance function ``beta * exp(-2 sin^2(pi w dt) / ell^2)`` and its derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

PARAMS = ("beta", "w", "ell", "sigma2")


@dataclass(frozen=True)
class Hyperparams:
    """Kernel hyperparameters plus the observation noise variance.

    ``w`` is the frequency in cycles per time unit, so the period is ``1 / w``.
    """

    beta: float
    w: float
    ell: float
    sigma2: float

    def __post_init__(self):
        for name in PARAMS:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def period(self) -> float:
        return 1.0 / self.w

    def with_w(self, w: float) -> "Hyperparams":
        return replace(self, w=float(w))

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.w, self.ell, self.sigma2])

    @classmethod
    def from_array(cls, a) -> "Hyperparams":
        return cls(*(float(v) for v in a))


def cov(h: Hyperparams, xi: float, xj: float) -> float:
    s = math.sin(h.w * math.pi * (xi - xj))
    return h.beta * math.exp(-2.0 * s * s / h.ell ** 2)


def _lags(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    return t[:, None] - t[None, :]


def cov_matrix(h: Hyperparams, times, times2=None) -> np.ndarray:
    """Gram matrix of the noise-free kernel.

    With one argument the result is symmetric by construction (the lower
    triangle is mirrored), with ``beta`` on the diagonal.
    """
    if times2 is not None:
        t1 = np.asarray(times, dtype=float)
        t2 = np.asarray(times2, dtype=float)
        s = np.sin(h.w * np.pi * (t1[:, None] - t2[None, :]))
        return h.beta * np.exp(-2.0 * s * s / h.ell ** 2)
    d = _lags(times)
    s = np.sin(h.w * np.pi * d)
    K = h.beta * np.exp(-2.0 * s * s / h.ell ** 2)
    K = np.tril(K) + np.tril(K, -1).T
    np.fill_diagonal(K, h.beta)
    return K


def cov_grad(h: Hyperparams, times, param: str) -> np.ndarray:
    """Elementwise derivative of ``K + sigma2 I`` with respect to one raw hyperparameter."""
    t = np.asarray(times, dtype=float)
    n = len(t)
    if param == "sigma2":
        return np.eye(n)
    K = cov_matrix(h, t)
    if param == "beta":
        return K / h.beta
    d = _lags(t)
    arg = h.w * np.pi * d
    s = np.sin(arg)
    if param == "ell":
        G = K * (4.0 * s * s / h.ell ** 3)
    elif param == "w":
        G = K * (-4.0 * np.pi * d * s * np.cos(arg) / h.ell ** 2)
    else:
        raise ValueError(f"unknown hyperparameter {param!r}")
    G = np.tril(G) + np.tril(G, -1).T
    return G
