import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chronocollapse.cosmo import simulate_ensemble
from chronocollapse.fock import DegenerateStateError, FockVector, ModelParams
from chronocollapse.noise import (
    BRIDGE_STREAM,
    CLOCK_STREAM,
    SPACE_STREAM,
    NoisePath,
    PathWeight,
    Scheme,
    brownian,
    derive_seed,
    make_rng,
    raw_log_density_correction,
    refine_innovations,
    sample_physical_step,
    sample_raw,
)


def kahan_cumsum(x):
    out = np.empty(len(x))
    s = c = 0.0
    for i, v in enumerate(x):
        y = v - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out


class TestSeeds:
    def test_streams_distinct(self):
        seeds = {derive_seed(7, s, i) for s in (SPACE_STREAM, CLOCK_STREAM, BRIDGE_STREAM) for i in range(50)}
        assert len(seeds) == 150

    def test_reproducible(self):
        assert derive_seed(123, 0, 5) == derive_seed(123, 0, 5)
        a = make_rng(derive_seed(1, 0, 0)).standard_normal(4)
        b = make_rng(derive_seed(1, 0, 0)).standard_normal(4)
        assert np.array_equal(a, b)

    @given(st.integers(0, 2 ** 64 - 1), st.integers(0, 3), st.integers(0, 10 ** 6))
    def test_seed_range(self, master, stream, index):
        s = derive_seed(master, stream, index)
        assert 0 <= s < 2 ** 64


class TestRaw:
    def test_mean_and_variance(self):
        lam, dt, n = 0.7, 0.05, 10 ** 6
        w = sample_raw(n, dt, lam, seed=11).values
        assert abs(w.mean()) < 4 * math.sqrt(lam / dt / n)
        assert w.var() == pytest.approx(lam / dt, rel=0.01)

    def test_drift_shifts_mean(self):
        w = sample_raw(10 ** 5, 0.1, 1.0, seed=3, drift=0.5).values
        assert w.mean() == pytest.approx(1.0, abs=4 * math.sqrt(10 / 1e5))

    def test_var_B(self):
        lam, dt, steps, paths = 1.3, 0.1, 40, 20000
        B = np.array([brownian(sample_raw(steps, dt, lam, seed=s))[-1] for s in range(paths)])
        assert B.var() == pytest.approx(lam * steps * dt, rel=0.02)

    def test_brownian_scaling(self):
        lam, dt, steps, paths = 1.0, 0.1, 40, 20000
        B = np.array([brownian(sample_raw(steps, dt, lam, seed=10 ** 6 + s)) for s in range(paths)])
        v1, v2 = B[:, steps // 2 - 1].var(), B[:, -1].var()
        # the variance of a sample variance of a normal is 2 sigma^4 / n
        err = math.sqrt(2 * v2 ** 2 / paths + 4 * 2 * v1 ** 2 / paths)
        assert abs(v2 - 2 * v1) < 3 * err

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            sample_raw(0, 0.1, 1.0, 0)
        with pytest.raises(ValueError):
            sample_raw(10, 0.1, 0.0, 0)

    def test_density_correction(self):
        assert raw_log_density_correction(3.0, 1.5, 0.2, drift=1.0) == pytest.approx(0.0)
        assert raw_log_density_correction(2.0, 1.0, 0.5) == pytest.approx(1.0)

    def test_path_weight(self):
        assert PathWeight(math.log(3.0), Scheme.RAW).statistical_weight == pytest.approx(3.0)
        assert PathWeight(5.0, Scheme.PHYSICAL).statistical_weight == 1.0

    def test_raw_measure_normalized(self):
        # mean of the Radon-Nikodym factor over raw paths is 1
        p = ModelParams(lam=1.0, n_max=1)
        init = FockVector(np.array([math.sqrt(0.3), math.sqrt(0.7)]))
        run = simulate_ensemble(p, 100, 0.01, Scheme.RAW, 42, 20000, init=init, stride=100, raw_drift=0.5,
                                auto_n_max=False)
        w = np.exp(run.result.log_weight[:, -1])
        assert abs(w.mean() - 1.0) < 3 * w.std(ddof=1) / math.sqrt(w.size)


class TestPhysical:
    def test_eigenstate(self):
        p = ModelParams(lam=0.5, n_max=5)
        rng = make_rng(9)
        ws = np.array([sample_physical_step(FockVector.basis(3, 5), p, 0.1, rng) for _ in range(20000)])
        assert ws.mean() == pytest.approx(3.0, abs=4 * math.sqrt(5 / 20000))
        assert ws.var() == pytest.approx(5.0, rel=0.05)

    @pytest.mark.parametrize("method", ["mixture", "gaussian"])
    def test_equal_superposition_mean(self, method):
        p = ModelParams(lam=1.0, n_max=1)
        v = FockVector(np.array([1.0, 1.0]))
        rng = make_rng(4)
        ws = np.array([sample_physical_step(v, p, 0.1, rng, method) for _ in range(40000)])
        sd = ws.std() / math.sqrt(ws.size)
        assert abs(ws.mean() - 1.0) < 4 * sd

    def test_gaussian_variance(self):
        p = ModelParams(lam=1.0, n_max=1)
        v = FockVector(np.array([1.0, 1.0]))
        rng = make_rng(8)
        ws = np.array([sample_physical_step(v, p, 0.1, rng, "gaussian") for _ in range(40000)])
        assert ws.var() == pytest.approx(10.0, rel=0.03)

    def test_collapsed_state_drift(self):
        p = ModelParams(lam=0.8, n_max=4)
        run = simulate_ensemble(p, 200, 0.1, Scheme.PHYSICAL, 5, 2000, init=FockVector.basis(2, 4),
                                stride=200, auto_n_max=False)
        t = 20.0
        est = run.result.brownian[:, -1] / (2 * p.lam * t)
        assert abs(est.mean() - 2.0) < 3 * est.std(ddof=1) / math.sqrt(est.size)

    def test_degenerate(self):
        with pytest.raises(DegenerateStateError):
            sample_physical_step(FockVector(np.zeros(3)), ModelParams(lam=1, n_max=2), 0.1, make_rng(0))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            sample_physical_step(FockVector.vacuum(2), ModelParams(lam=1, n_max=2), 0.1, make_rng(0), "bogus")


class TestBrownian:
    def test_constant(self):
        path = NoisePath(0.25, np.full(8, 3.0))
        assert np.allclose(brownian(path), 3.0 * 0.25 * np.arange(1, 9))

    def test_step(self):
        vals = np.zeros(6)
        vals[0] = 2.0
        assert np.array_equal(brownian(NoisePath(0.5, vals)), np.full(6, 1.0))

    def test_compensated_oracle(self):
        path = sample_raw(10 ** 5, 0.01, 1.0, seed=77)
        ours = brownian(path)
        ref = 0.01 * kahan_cumsum(path.values)
        scale = np.maximum(np.abs(ref), np.sqrt(1.0 * 0.01 * np.arange(1, ref.size + 1)))
        assert np.max(np.abs(ours - ref) / scale) <= 1e-12

    def test_left_to_right(self):
        vals = np.array([1e16, 1.0, -1e16, 1.0])
        # fixed order means the 1.0 after 1e16 is absorbed
        assert brownian(NoisePath(1.0, vals))[-1] == 1.0


class TestCsv:
    def test_roundtrip(self, tmp_path):
        path = sample_raw(50, 0.1, 2.0, seed=3)
        f = tmp_path / "noise.csv"
        path.to_csv(f)
        assert f.read_text().splitlines()[0] == "step,w"
        back = NoisePath.from_csv(f, 0.1)
        assert np.array_equal(back.values, path.values)

    def test_rejects_gaps(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("step,w\n1,0.5\n3,0.2\n")
        with pytest.raises(ValueError):
            NoisePath.from_csv(f, 0.1)

    def test_rejects_header(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("k,w\n1,0.5\n")
        with pytest.raises(ValueError):
            NoisePath.from_csv(f, 0.1)


class TestBridge:
    def test_refined_sums_match(self):
        rng = make_rng(1)
        xi = rng.standard_normal((3, 10))
        fine = refine_innovations(xi, 0.2, rng)
        coarse_inc = xi * math.sqrt(0.2)
        fine_inc = fine * math.sqrt(0.1)
        assert np.allclose(fine_inc[:, 0::2] + fine_inc[:, 1::2], coarse_inc, atol=1e-14)

    def test_refined_are_standard(self):
        rng = make_rng(2)
        fine = refine_innovations(rng.standard_normal(100000), 0.1, rng)
        assert fine.std() == pytest.approx(1.0, rel=0.01)
        assert abs(np.corrcoef(fine[0::2], fine[1::2])[0, 1]) < 0.02
