import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpperiod import gp
from gpperiod.fastpath import (LowRankConfig, SubsampleConfig, epsnet_anchors, epsnet_fine_scan, lowrank_chol_shift,
                               subsample_ensemble_score, subsample_indices, taylor_kernel_step)
from gpperiod.grid import FrequencyGrid, arithmetic_grid, build_fine_grid
from gpperiod.kernel import Hyperparams, cov_grad, cov_matrix
from gpperiod.lightcurve import Criterion, LightCurve
from gpperiod.linalg import CholeskyFactor, cholesky
from gpperiod.search import grid_scan
from gpperiod.synth import SynthSpec, gen_gp

H = Hyperparams(1.0, 0.4, 0.8, 0.1)


def series(seed, n, h=H, noise=True):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(-5, 5, n))
    f = np.linalg.cholesky(cov_matrix(h, t) + 1e-10 * np.eye(n)) @ rng.standard_normal(n)
    if noise:
        f = f + rng.normal(0, np.sqrt(h.sigma2), n)
    return LightCurve(t, f)


def gram(h, t):
    return cov_matrix(h, t) + h.sigma2 * np.eye(len(t))


def shifted_lml(t, y, h, w0, dw, rank):
    base = cholesky(gram(h.with_w(w0), t))
    f = lowrank_chol_shift(base, taylor_kernel_step(h, t, w0), dw, LowRankConfig(rank=rank))
    return f, lml_from_lower(f.L, y)


def lml_from_lower(L, y):
    z = np.linalg.solve(L, y)
    return -0.5 * z @ z - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)


class TestSubsampleConfig:
    @pytest.mark.parametrize("n,size", [(240, 36), (100, 30), (400, 40), (20, 20)])
    def test_clamp(self, n, size):
        assert SubsampleConfig().subset_size(n) == size

    def test_invalid(self):
        with pytest.raises(ValueError):
            SubsampleConfig(min_points=50, max_points=40)
        with pytest.raises(ValueError):
            SubsampleConfig(fraction=0)
        with pytest.raises(ValueError):
            LowRankConfig(rank=0)
        with pytest.raises(ValueError):
            LowRankConfig(epsilon=0)


class TestSubsample:
    def test_degenerate_ensemble_is_grid_scan(self):
        lc = series(0, 40)
        g = arithmetic_grid(0.1, 2.0, 0.01)
        cfg = SubsampleConfig(fraction=1.0, repetitions=1, min_points=1, max_points=40)
        a = subsample_ensemble_score(lc, g, H, cfg).scores
        b = grid_scan(lc, g, H).scores
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_fallback_for_short_series(self):
        lc = series(1, 25)
        g = arithmetic_grid(0.1, 2.0, 0.05)
        assert np.array_equal(subsample_ensemble_score(lc, g, H, SubsampleConfig()).scores, grid_scan(lc, g, H).scores)

    def test_is_mean_over_subsets(self):
        lc = series(2, 100)
        g = FrequencyGrid([0.3, 0.4, 0.9])
        cfg = SubsampleConfig(repetitions=4, seed=3)
        idx = subsample_indices(100, cfg)
        assert idx.shape == (4, 30)
        y = lc.mags - lc.mags.mean()
        for crit in (Criterion.ML, Criterion.CV):
            ref = np.mean([gp.scan_scores(lc.times[i], y[i], g.values, H, crit) for i in idx], axis=0)
            np.testing.assert_allclose(subsample_ensemble_score(lc, g, H, cfg, crit).scores, ref, rtol=1e-10)

    def test_reproducible_and_prefix_consistent(self):
        a = subsample_indices(100, SubsampleConfig(repetitions=10, seed=4))
        b = subsample_indices(100, SubsampleConfig(repetitions=5, seed=4))
        assert np.array_equal(a[:5], b)
        assert np.array_equal(a, subsample_indices(100, SubsampleConfig(repetitions=10, seed=4)))
        assert not np.array_equal(a, subsample_indices(100, SubsampleConfig(repetitions=10, seed=5)))
        assert all(len(np.unique(r)) == 30 for r in a)

    def test_true_frequency_beats_double(self):
        for seed in range(5):
            h = Hyperparams(1.0, 0.5, 1.0, 1e-4)
            lc = series(seed, 120, h, noise=False)
            tab = subsample_ensemble_score(lc, FrequencyGrid([0.5, 1.0]), h, SubsampleConfig(seed=seed))
            assert tab.scores[0] > tab.scores[1]


class TestTaylor:
    def test_matches_cov_grad(self):
        t = np.sort(np.random.default_rng(0).uniform(-5, 5, 12))
        k = taylor_kernel_step(H, t, 0.7)
        assert np.array_equal(k, cov_grad(H.with_w(0.7), t, "w"))
        assert np.array_equal(k, k.T)

    def test_finite_difference(self):
        t = np.sort(np.random.default_rng(1).uniform(-5, 5, 10))
        e = 1e-6
        fd = (cov_matrix(H.with_w(0.7 + e), t) - cov_matrix(H.with_w(0.7 - e), t)) / (2 * e)
        np.testing.assert_allclose(taylor_kernel_step(H, t, 0.7), fd, rtol=1e-6, atol=1e-7)


class TestLowRankShift:
    def test_zero_shift(self):
        t = np.linspace(-3, 3, 8)
        base = cholesky(gram(H, t))
        assert lowrank_chol_shift(base, taylor_kernel_step(H, t, H.w), 0.0, LowRankConfig()) is base

    def test_precondition(self):
        t = np.linspace(-3, 3, 8)
        with pytest.raises(ValueError):
            lowrank_chol_shift(cholesky(gram(H, t)), taylor_kernel_step(H, t, H.w), 0.01, LowRankConfig())

    def test_full_rank_lml(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            t = np.sort(rng.uniform(-5, 5, 8))
            y = rng.standard_normal(8)
            _, approx = shifted_lml(t, y, H, 0.4, 1e-5, 8)
            exact = gp.log_marginal_likelihood((t, y), H.with_w(0.4 + 1e-5))[0]
            assert abs(approx - exact) <= 1e-3 * (1 + abs(exact))

    def test_full_rank_reconstruction(self):
        t = np.sort(np.random.default_rng(3).uniform(-5, 5, 16))
        dw = 1e-3
        base = cholesky(gram(H, t))
        f = lowrank_chol_shift(base, taylor_kernel_step(H, t, H.w), dw, LowRankConfig(rank=16))
        taylor = gram(H, t) + dw * taylor_kernel_step(H, t, H.w)
        np.testing.assert_allclose(f.L @ f.L.T, taylor, atol=1e-10)

    def test_truncation_graceful(self):
        t = np.sort(np.random.default_rng(4).uniform(-5, 5, 64))
        h = Hyperparams(1.0, 0.4, 1.0, 0.1)
        dw = 0.002
        exact = gram(h.with_w(h.w + dw), t)
        errs = {}
        for m in (64, 32):
            f = lowrank_chol_shift(cholesky(gram(h, t)), taylor_kernel_step(h, t, h.w), dw, LowRankConfig(rank=m))
            errs[m] = np.linalg.norm(f.L @ f.L.T - exact) / np.linalg.norm(exact)
        assert errs[32] <= 2 * errs[64]

    def test_quadratic_error_scaling(self):
        h = Hyperparams(1.0, 0.4, 0.8, 1.0)
        t = np.sort(np.random.default_rng(5).uniform(-5, 5, 24))
        dws = np.array([1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 4.9e-3])
        base = cholesky(gram(h, t))
        kt = taylor_kernel_step(h, t, h.w)
        err = []
        for dw in dws:
            f = lowrank_chol_shift(base, kt, dw, LowRankConfig(rank=24))
            err.append(np.linalg.norm(f.L @ f.L.T - gram(h.with_w(h.w + dw), t)))
        slope = np.polyfit(np.log(dws), np.log(err), 1)[0]
        assert 1.8 <= slope <= 2.2
        c = np.array(err) / dws ** 2
        assert c.max() <= 1.5 * c.min()

    @given(st.floats(-4.9e-3, 4.9e-3), st.integers(0, 50))
    def test_downdate_failure_or_factor(self, dw, seed):
        t = np.sort(np.random.default_rng(seed).uniform(-5, 5, 10))
        try:
            f = lowrank_chol_shift(cholesky(gram(H, t)), taylor_kernel_step(H, t, H.w), dw, LowRankConfig())
        except gp.NotPositiveDefiniteError:
            return
        assert isinstance(f, CholeskyFactor)
        assert np.all(np.diag(f.L) > 0)


class TestEpsNet:
    @given(st.lists(st.floats(0.01, 5), min_size=1, max_size=60, unique=True), st.floats(1e-4, 0.2))
    def test_cover(self, vals, eps):
        v = np.sort(np.array(vals))
        owner = epsnet_anchors(v, eps)
        assert np.all(np.abs(v - v[owner]) < eps)
        anchors = np.unique(owner)
        assert np.all(owner[anchors] == anchors)
        # nearest-anchor assignment
        d = np.abs(v[:, None] - v[anchors][None, :])
        assert np.allclose(np.abs(v - v[owner]), d.min(1))

    def test_single_anchor(self):
        v = build_fine_grid([1.0], 0.001, 0.0001).values
        assert len(np.unique(epsnet_anchors(v, 1.0))) == 1

    def test_all_anchors_bit_identical(self):
        lc = series(6, 30)
        fine = build_fine_grid([0.4, 0.8], 0.001, 0.0001)
        for crit in (Criterion.ML, Criterion.CV):
            a = epsnet_fine_scan(lc, fine, H, LowRankConfig(epsilon=1e-5), crit).scores
            b = grid_scan(lc, fine, H, crit).scores
            assert np.array_equal(a, b)

    def test_scores_are_taylor_shifts(self):
        # oracle: exact factorization of the first-order matrix around each point's anchor
        lc = series(7, 24)
        t = lc.times - 0.5 * (lc.times[0] + lc.times[-1])
        y = lc.mags - lc.mags.mean()
        fine = build_fine_grid([0.4], 0.004, 0.0004)
        cfg = LowRankConfig(rank=24)
        got = epsnet_fine_scan(lc, fine, H, cfg).scores
        owner = epsnet_anchors(fine.values, cfg.epsilon)
        for k, a in enumerate(owner):
            wa = fine.values[a]
            K = gram(H.with_w(wa), t) + (fine.values[k] - wa) * taylor_kernel_step(H, t, wa)
            ref = lml_from_lower(np.linalg.cholesky(K), y)
            assert got[k] == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_anchor_centered(self):
        v = build_fine_grid([1.0], 0.001, 0.0001).values
        owner = epsnet_anchors(v, 0.005)
        assert np.all(owner == 10)
