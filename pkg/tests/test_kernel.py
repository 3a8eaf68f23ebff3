import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpperiod.kernel import PARAMS, Hyperparams, cov, cov_grad, cov_matrix

hypers = st.builds(Hyperparams, st.floats(0.1, 5.0), st.floats(0.05, 3.0), st.floats(0.2, 3.0),
                   st.floats(1e-3, 1.0))


class TestCov:
    def test_examples(self):
        h = Hyperparams(1.0, 0.25, 1.0, 0.1)
        assert cov(h, 3.0, 3.0) == 1.0
        assert cov(h, 2.0, 0.0) == pytest.approx(math.exp(-2), abs=1e-6)
        assert cov(h, 4.0, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_validation(self):
        for bad in [(0, 1, 1, 1), (1, -1, 1, 1), (1, 1, math.inf, 1), (1, 1, 1, 0)]:
            with pytest.raises(ValueError):
                Hyperparams(*bad)

    @given(hypers, st.floats(-100, 100), st.integers(-20, 20))
    def test_periodicity(self, h, x, k):
        assert cov(h, x, x + k / h.w) == pytest.approx(h.beta, rel=1e-12)

    @given(hypers, st.floats(-50, 50), st.floats(-50, 50))
    def test_bounds(self, h, a, b):
        c = cov(h, a, b)
        assert 0 < c <= h.beta


class TestCovMatrix:
    def test_examples(self):
        h = Hyperparams(2.5, 0.4, 0.7, 0.1)
        assert np.array_equal(cov_matrix(h, [0.0]), [[2.5]])
        K = cov_matrix(h, [0.0, 1 / 0.4])
        assert np.allclose(K, 2.5, rtol=1e-12)
        t = np.random.default_rng(0).uniform(-5, 5, 8)
        K = cov_matrix(h, t)
        assert np.array_equal(K, K.T)
        assert np.all(np.diag(K) == 2.5)

    @given(hypers, st.integers(2, 30), st.integers(0, 1000))
    def test_psd(self, h, n, seed):
        t = np.random.default_rng(seed).uniform(-10, 10, n)
        vals = np.linalg.eigvalsh(cov_matrix(h, t))
        assert vals.min() >= -1e-8 * h.beta


def _fd(h, t, p, step=1e-6):
    a = h.as_array()
    i = PARAMS.index(p)
    out = []
    for s in (1, -1):
        b = a.copy()
        b[i] += s * step
        hb = Hyperparams.from_array(b)
        K = cov_matrix(hb, t)
        K[np.diag_indices_from(K)] += hb.sigma2
        out.append(K)
    return (out[0] - out[1]) / (2 * step)


class TestCovGrad:
    def test_beta_linearity(self):
        h = Hyperparams(1.7, 0.3, 0.8, 0.2)
        t = np.linspace(0, 3, 6)
        assert np.allclose(cov_grad(h, t, "beta"), cov_matrix(h, t) / 1.7, rtol=1e-15)

    def test_w_examples(self):
        h = Hyperparams(1.0, 0.25, 1.0, 0.1)
        G = cov_grad(h, np.array([0.0, 2.0, 3.1]), "w")
        assert np.all(np.diag(G) == 0.0)
        assert abs(G[0, 1]) < 1e-15
        assert np.array_equal(G, G.T)

    def test_sigma2_identity(self):
        h = Hyperparams(1.0, 0.25, 1.0, 0.1)
        assert np.array_equal(cov_grad(h, np.arange(4.0), "sigma2"), np.eye(4))

    def test_unknown_param(self):
        with pytest.raises(ValueError):
            cov_grad(Hyperparams(1, 1, 1, 1), np.arange(3.0), "nu")

    @given(hypers, st.integers(2, 10), st.integers(0, 1000), st.sampled_from(PARAMS))
    def test_matches_finite_differences(self, h, n, seed, p):
        t = np.random.default_rng(seed).uniform(-3, 3, n)
        G = cov_grad(h, t, p)
        F = _fd(h, t, p)
        scale = max(np.abs(G).max(), 1e-3)
        assert np.abs(G - F).max() <= 1e-5 * scale
