import json
import math

import numpy as np
import pytest

from gpperiod.kernel import Hyperparams, cov_matrix
from gpperiod.lightcurve import LightCurve
from gpperiod.synth import (KINDS, MethodOutput, SynthSpec, gen_eclipsing, gen_gp, gen_harmonic, gen_sawtooth,
                            draw_latent, generate, harmonic_fn, make_method, prefix_subset, reconstruction_rmse,
                            run_benchmark, series_seed)


class TestSynthSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SynthSpec("nope", 1, 10)
        with pytest.raises(ValueError):
            SynthSpec("gp", 1, 1)
        with pytest.raises(ValueError):
            SynthSpec("gp", 1, 10, time_range=(1, 1))
        with pytest.raises(ValueError):
            SynthSpec("gp", 1, 10, noise_var=0)


class TestHarmonic:
    def test_noiseless_limit(self):
        for s in gen_harmonic(SynthSpec("harmonic", 5, 50, noise_var=1e-12, seed=1)):
            assert np.max(np.abs(s.lc.mags - harmonic_fn(s.params, s.lc.times))) <= 1e-5
            np.testing.assert_allclose(s.truth_f, harmonic_fn(s.params, s.truth_t))

    def test_period_range(self):
        for s in gen_harmonic(SynthSpec("harmonic", 200, 10, seed=2)):
            assert 1 < s.params["omega"] < 4
            assert math.pi / 2 < s.period < 2 * math.pi
            assert s.period == pytest.approx(2 * math.pi / s.params["omega"])

    def test_sampling(self):
        s = gen_harmonic(SynthSpec("harmonic", 1, 500, seed=3))[0]
        t = s.lc.times
        assert np.all(np.diff(t) > 0) and t[0] >= -5 and t[-1] <= 5
        assert s.lc.id == "harmonic_0000"


@pytest.mark.parametrize("kind", KINDS)
def test_same_seed_same_corpus(kind):
    a = generate(SynthSpec(kind, 4, 30, seed=9))
    b = generate(SynthSpec(kind, 4, 30, seed=9))
    c = generate(SynthSpec(kind, 4, 30, seed=10))
    for x, y in zip(a, b):
        assert np.array_equal(x.lc.times, y.lc.times) and np.array_equal(x.lc.mags, y.lc.mags)
        assert x.period == y.period and x.params == y.params
    assert not np.array_equal(a[0].lc.mags, c[0].lc.mags)


def test_series_prefix_stable():
    # series i does not depend on how many series are generated
    a = gen_gp(SynthSpec("gp", 2, 30, seed=4))
    b = gen_gp(SynthSpec("gp", 5, 30, seed=4))
    assert np.array_equal(a[1].lc.mags, b[1].lc.mags)


class TestGp:
    def test_params(self):
        for s in gen_gp(SynthSpec("gp", 20, 20, seed=5)):
            assert 0 < s.params["beta"] <= 3 and 0 < s.params["ell"] <= 3
            assert 0.5 < s.period <= 2.5
            assert s.params["period"] == s.period

    def test_one_period_apart(self):
        rng = np.random.default_rng(6)
        for p in (0.7, 1.3, 2.2):
            h = Hyperparams(2.0, 1 / p, 0.9, 1.0)
            x = np.array([-3.1, -0.4, -0.4 + p, 1.9])
            f = draw_latent(h, x, rng)
            assert abs(f[1] - f[2]) <= 1e-4

    def test_monte_carlo_covariance(self):
        # sample covariance of many draws at fixed times approaches the kernel
        h = Hyperparams(1.3, 1 / 1.7, 0.8, 1.0)
        t = np.array([-2.0, -0.5, 0.3, 1.1, 4.0])
        K = cov_matrix(h, t) + 1e-10 * np.eye(5)
        L = np.linalg.cholesky(K)
        rng = np.random.default_rng(7)
        draws = (L @ rng.standard_normal((5, 10_000))).T
        S = np.cov(draws, rowvar=False)
        assert np.linalg.norm(S - K) / np.linalg.norm(K) <= 0.1

    def test_observed_block_distribution(self):
        # the generator's joint draw restricted to sample times has the kernel covariance
        spec = SynthSpec("gp", 2000, 3, noise_var=1e-12, seed=8)
        vals = []
        for s in gen_gp(spec):
            vals.append(s.lc.mags[0] ** 2 / s.params["beta"])
        # E[f(t)^2] = beta for every t
        assert np.mean(vals) == pytest.approx(1.0, abs=0.1)


class TestOtherShapes:
    def test_sawtooth_eclipsing(self):
        for s in gen_sawtooth(SynthSpec("sawtooth", 5, 50, seed=1)) + gen_eclipsing(SynthSpec("eclipsing", 5, 50)):
            assert 0.5 <= s.period <= 2.5
            assert len(s.lc) == 50
        e = gen_eclipsing(SynthSpec("eclipsing", 20, 10))
        assert all(0.3 * x.params["depth1"] <= x.params["depth2"] <= 0.6 * x.params["depth1"] for x in e)


class TestMethods:
    def test_names(self):
        for name in ("gp", "ls", "pdm", "gp-cv", "gp-sub-lowrank", "gp-L5"):
            make_method(name)
        for bad in ("foo", "ls-sub", "gp-zz"):
            with pytest.raises(ValueError):
                make_method(bad)

    def test_outputs(self):
        lc = gen_harmonic(SynthSpec("harmonic", 1, 40, seed=1))[0].lc
        out = make_method("gp")(lc, 0)
        assert isinstance(out, MethodOutput) and out.hyper is not None
        assert {"optimize", "coarse", "fine", "total"} <= set(out.timings)
        assert make_method("ls")(lc, 0).hyper is None


class TestBenchmark:
    def test_seeds(self):
        assert series_seed(1, 2, 3) == series_seed(1, 2, 3)
        assert series_seed(1, 2, 3) != series_seed(1, 2, 4)
        p = prefix_subset(100, 0, 1, 2)
        assert sorted(p) == list(range(100))

    def test_always_wrong_method(self, monkeypatch):
        import gpperiod.synth as synth
        monkeypatch.setitem(synth.__dict__, "make_method", lambda name: (lambda lc, seed: MethodOutput(1e6)))
        rep = run_benchmark(SynthSpec("harmonic", 3, 20), ["ls"], repetitions=2)
        assert rep.hit_rate("ls", 20) == 0.0

    def test_report_and_determinism(self):
        spec = SynthSpec("gp", 3, 40, seed=2)
        a = run_benchmark(spec, ["gp", "ls"], sizes=[20, 40], repetitions=2)
        b = run_benchmark(spec, ["gp", "ls"], sizes=[20, 40], repetitions=2)
        strip = lambda rows: [{k: v for k, v in r.items() if not k.startswith("time_")} for r in rows]
        assert strip(a.rows) == strip(b.rows)
        assert len(a.rows) == 3 * 2 * 2 * 2
        for cell in a.summary():
            assert 0 <= cell["hit_rate_mean"] <= 1 and cell["hit_rate_std"] >= 0
        doc = json.loads(a.to_json())
        assert doc["schema_version"] == 1 and len(doc["cells"]) == 4
        assert a.to_csv().splitlines()[0].startswith("method,n_samples")
        assert all(math.isnan(r["rmse"]) for r in a.rows if r["method"] == "ls")
        assert all(math.isfinite(r["rmse"]) for r in a.rows if r["method"] == "gp")

    def test_sizes_validated(self):
        with pytest.raises(ValueError):
            run_benchmark(SynthSpec("gp", 1, 40), ["ls"], sizes=[5])
        with pytest.raises(ValueError):
            run_benchmark(SynthSpec("gp", 1, 40), ["ls"], sizes=[50])
        with pytest.raises(ValueError):
            run_benchmark(SynthSpec("gp", 1, 40), [])

    def test_nested_subsets(self):
        spec = SynthSpec("harmonic", 1, 60, seed=3)
        s = generate(spec)[0]
        p = prefix_subset(60, spec.seed, 0, 0)
        assert set(p[:20]) <= set(p[:40])
        assert len(s.lc.subset(np.sort(p[:20]))) == 20

    def test_reconstruction_rmse_truth(self):
        s = gen_gp(SynthSpec("gp", 1, 100, noise_var=1e-4, seed=4))[0]
        h = Hyperparams(s.params["beta"], 1 / s.period, s.params["ell"], 1e-4)
        assert reconstruction_rmse(s.lc, h, s) < 0.05


@pytest.mark.slow
class TestTrends:
    SIZES = [10, 20, 30, 50, 100]

    @pytest.fixture(scope="class")
    @classmethod
    def reports(cls):
        out = {}
        for kind in ("harmonic", "gp"):
            out[kind] = run_benchmark(SynthSpec(kind, 20, 100, seed=21), ["gp", "ls", "pdm"],
                                      sizes=cls.SIZES, repetitions=2)
        return out

    @pytest.mark.parametrize("kind", ["harmonic", "gp"])
    @pytest.mark.parametrize("method", ["gp", "ls", "pdm"])
    def test_hit_rate_monotone(self, reports, kind, method):
        r = np.array([reports[kind].hit_rate(method, n) for n in self.SIZES])
        drops = -np.diff(r)
        assert np.sum(drops > 0) <= 1 and drops.max() <= 0.05

    def test_rmse_decreases(self, reports):
        rep = reports["gp"]
        rm = lambda n: np.nanmean(rep.per_rep("gp", n, "rmse"))
        assert rm(100) < rm(10)
