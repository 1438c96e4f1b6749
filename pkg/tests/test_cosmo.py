import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronocollapse.analytic import (
    CoherentOracle,
    CosmoAnalytic,
    FormulaError,
    PoorFitWarning,
    ratio_term_oracle,
    averaged_moments,
    delta_R_estimate,
    fit_C,
    mean_N2_asymptotic,
    mean_N_analytic,
    no_collapse_mean_N,
)
from chronocollapse.constants import PLANCK_LENGTH_M, SPEED_OF_LIGHT_M_S, TEN_BILLION_YEARS_S
from chronocollapse.cosmo import (
    THREADS_ENV,
    WorkerError,
    ensemble_spread,
    simulate_ensemble,
    simulate_trajectory,
    suggest_n_max,
    worker_count,
)
from chronocollapse.exact import H0InitialState, spread_h0
from chronocollapse.fock import FockVector, LeakageError, ModelParams
from chronocollapse.noise import Scheme
from chronocollapse.stats import EffectiveSampleSizeWarning, check_inequality_chain


class TestNoCollapse:
    def test_oscillation_matches_oracle(self):
        p = ModelParams(epsilon=1.0, g=0.2, n_max=16)
        rec = simulate_trajectory(p, 2000, 0.01)
        oracle = CoherentOracle.solve(1.0, 0.2, rec.times)
        assert np.max(np.abs(rec.meanN - oracle.mean_N)) <= 1e-8
        assert np.max(np.abs(rec.meanN - no_collapse_mean_N(1.0, 0.2, rec.times))) <= 1e-8
        assert np.max(np.abs(oracle.log_norm2)) <= 1e-10

    def test_free_coupling_quadratic(self):
        p = ModelParams(epsilon=0.0, g=0.3, n_max=40)
        rec = simulate_trajectory(p, 100, 0.1)
        assert np.allclose(rec.meanN, (0.3 * rec.times) ** 2, rtol=1e-10, atol=1e-12)

    def test_coherent_amplitudes(self):
        from chronocollapse.fock import unitary_step

        oracle = CoherentOracle.solve(0.7, 0.4, np.array([0.0, 1.0, 3.0]))
        v = FockVector.vacuum(30)
        p = ModelParams(epsilon=0.7, g=0.4, n_max=30)
        v = unitary_step(v, p, 3.0)
        assert np.max(np.abs(v.amplitudes - oracle.fock_amplitudes(2, 30))) <= 1e-9

    def test_vacuum_stationary(self):
        p = ModelParams(epsilon=1.0, g=0.0, lam=2.0, n_max=4)
        rec = simulate_trajectory(p, 200, 0.05, seed=3)
        assert np.all(rec.meanN == 0) and np.all(rec.meanN2 == 0) and np.all(rec.sigma2 == 0)

    def test_norm_conserved(self):
        p = ModelParams(epsilon=0.9, g=0.3, n_max=16)
        rec = simulate_trajectory(p, 10 ** 4, 0.01)
        assert np.max(np.abs(rec.log_norm2)) <= 1e-10


class TestGrowthLaw:
    A = CosmoAnalytic(1.0, 0.5, 2.0)

    def test_starts_at_zero(self):
        assert mean_N_analytic(self.A, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_scalar_in_scalar_out(self):
        assert isinstance(mean_N_analytic(self.A, 3.0), float)
        assert mean_N_analytic(self.A, [1.0, 2.0]).shape == (2,)

    def test_late_slope(self):
        t = np.array([400.0, 401.0])
        slope = np.diff(mean_N_analytic(self.A, t))[0]
        assert slope == pytest.approx(self.A.growth_rate, rel=1e-12)
        assert self.A.growth_rate == pytest.approx(0.25 * 2 / (1 + 1))

    def test_phi(self):
        assert self.A.phi == pytest.approx(math.atan(1.0))
        assert CosmoAnalytic(1.0, 0.5, 0.0).phi == pytest.approx(math.pi / 2)
        assert -math.pi / 2 < CosmoAnalytic(-3.0, 0.5, 0.1).phi <= math.pi / 2

    def test_zero_rate_limit(self):
        a = CosmoAnalytic(1.0, 0.2, 0.0)
        t = np.linspace(0, 10, 7)
        assert np.allclose(mean_N_analytic(a, t), (0.4 ** 2) * np.sin(t / 2) ** 2)
        assert a.growth_rate == 0.0

    def test_zeno(self):
        rates = [CosmoAnalytic(1.0, 0.5, lam).growth_rate for lam in (1e1, 1e2, 1e3, 1e4)]
        assert all(a > b for a, b in zip(rates, rates[1:]))
        assert rates[-1] < 1e-3

    @settings(max_examples=100)
    @given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.01, 20), st.floats(0, 200))
    def test_nonnegative(self, eps, g, lam, t):
        assert mean_N_analytic(CosmoAnalytic(eps, g, lam), t) >= 0.0

    def test_negative_formula_detected(self, monkeypatch):
        # a wrong phase makes the early bracket negative; that must not be clipped away
        monkeypatch.setattr(CosmoAnalytic, "phi", property(lambda self: 0.0))
        with pytest.raises(FormulaError):
            mean_N_analytic(CosmoAnalytic(1.0, 0.5, 1.0), np.linspace(0, 1, 11))

    def test_matches_exact_channel(self):
        # the averaged dynamics of the discrete model approaches the continuum law as dt^2
        p = ModelParams(1.0, 0.5, 2.0, n_max=60)
        t_end = 10.0
        errs = []
        for dt in (0.1, 0.05):
            steps = int(round(t_end / dt))
            t, m, _, top = averaged_moments(p, dt, steps, steps)
            assert top < 1e-10
            errs.append(abs(m[-1] - mean_N_analytic(CosmoAnalytic(1.0, 0.5, 2.0), t[-1])))
        assert errs[1] < 0.35 * errs[0]
        assert errs[1] / mean_N_analytic(CosmoAnalytic(1.0, 0.5, 2.0), t_end) < 1e-3


class TestSecondMoment:
    def test_definition(self):
        a = CosmoAnalytic(0.5, 0.3, 1.0)
        t = np.array([10.0, 50.0])
        assert np.array_equal(mean_N2_asymptotic(a, t) / (2 * (a.growth_rate * t) ** 2), [1.0, 1.0])

    def test_ratio_oracle_substitution(self):
        a = CosmoAnalytic(1.0, 0.5, 2.0)
        N = mean_N_analytic(a, 40.0)
        assert ratio_term_oracle(a, 40.0, N ** 2) == pytest.approx(2 * N ** 2)

    def test_ratio_oracle_static_limit(self):
        # no ensemble spread: the oracle is just the squared mean
        a = CosmoAnalytic(1.0, 0.5, 2.0)
        assert ratio_term_oracle(a, 7.0, 0.0) == pytest.approx(mean_N_analytic(a, 7.0) ** 2)

    def test_channel_ratio_tends_to_one(self):
        p = ModelParams(0.5, 0.3, 1.0, n_max=150)
        t, m, m2, top = averaged_moments(p, 0.05, 1000, 100)
        assert top < 1e-8
        r = m2 / (2 * m ** 2)
        assert abs(r[-1] - 1) < abs(r[0] - 1) and abs(r[-1] - 1) < 0.1


def identical_records(n, rec):
    return [rec] * n


class TestEnsembleSpread:
    def test_identical_records(self):
        rec = simulate_trajectory(ModelParams(1.0, 0.5, 2.0, n_max=30), 100, 0.05, seed=9, stride=10)
        st_ = ensemble_spread(identical_records(120, rec))
        assert np.allclose(st_.sigma2_bar, rec.sigma2, rtol=1e-12, atol=1e-15)
        assert np.allclose(st_.meanN_bar_err, 0.0, atol=1e-12)

    def test_few_records_warn(self):
        rec = simulate_trajectory(ModelParams(1.0, 0.5, 2.0, n_max=30), 20, 0.05, seed=9)
        with pytest.warns(UserWarning):
            ensemble_spread([rec] * 10)

    def test_grid_mismatch(self):
        a = simulate_trajectory(ModelParams(1.0, 0.5, 2.0, n_max=30), 20, 0.05, seed=1)
        b = simulate_trajectory(ModelParams(1.0, 0.5, 2.0, n_max=30), 10, 0.05, seed=1)
        with pytest.raises(ValueError):
            ensemble_spread([a, b])

    def test_h0_matches_exact(self):
        lam, t = 1.0, 100.0
        init = H0InitialState.from_probabilities([0, 1], [0.4, 0.6])
        run = simulate_ensemble(ModelParams(lam=lam, n_max=1), 1000, 0.1, Scheme.PHYSICAL, 31, 4000,
                                init=init.to_fock(1), stride=100)
        s = run.stats()
        ref = spread_h0(init, lam, t)
        i = s.at(t)
        assert abs(s.sigma2_bar[i] - ref.sigma2_bar) <= 3 * s.sigma2_bar_err[i] + 1e-12
        assert abs(s.meanN2_bar[i] - ref.meanN2_bar) <= 3 * s.meanN2_bar_err[i]

    @staticmethod
    def _raw_vs_physical(steps):
        p = ModelParams(1.0, 0.5, 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EffectiveSampleSizeWarning)
            raw = simulate_ensemble(p, steps, 0.05, Scheme.RAW, 5, 20000, stride=10).stats()
        phys = simulate_ensemble(p, steps, 0.05, Scheme.PHYSICAL, 6, 5000, stride=10).stats()
        return np.abs(raw.meanN_bar - phys.meanN_bar) / np.hypot(raw.meanN_bar_err, phys.meanN_bar_err)

    def test_raw_and_physical_agree_early(self):
        # lam t <= 1, where the raw weights are still well behaved
        assert np.all(self._raw_vs_physical(20) < 3)

    @pytest.mark.xfail(strict=True, reason="raw weights become heavy tailed once <N> grows; biased low by lam t ~ 2")
    def test_raw_and_physical_agree_to_lam_t_5(self):
        assert np.all(self._raw_vs_physical(100) < 3)

    def test_ordering_chain_holds(self):
        run = simulate_ensemble(ModelParams(1.0, 0.5, 2.0), 400, 0.05, Scheme.PHYSICAL, 8, 2000, stride=20)
        check_inequality_chain(run.stats())

    @pytest.mark.xfail(strict=True, reason="the median per-trajectory spread grows with N; only the relative spread shrinks")
    def test_median_spread_decreases(self):
        run = simulate_ensemble(ModelParams(1.0, 0.5, 2.0), 500, 0.05, Scheme.PHYSICAL, 1, 1000, stride=50)
        i5, i50 = np.argmin(abs(2 * run.times - 5)), np.argmin(abs(2 * run.times - 50))
        s = run.result.sigma2
        assert np.median(s[:, i50]) < np.median(s[:, i5])

    def test_median_relative_spread_decreases(self):
        run = simulate_ensemble(ModelParams(1.0, 0.5, 2.0), 500, 0.05, Scheme.PHYSICAL, 1, 1000, stride=50)
        i5, i50 = np.argmin(abs(2 * run.times - 5)), np.argmin(abs(2 * run.times - 50))
        rel = run.result.sigma2 / run.result.meanN ** 2
        assert np.median(rel[:, i50]) < 0.1 * np.median(rel[:, i5])


class TestFitC:
    class Series:
        def __init__(self, times, meanN, sigma2):
            self.times, self.meanN_bar, self.sigma2_bar = times, meanN, sigma2

    def test_exact_linear(self):
        t = np.linspace(1, 100, 50)
        N = 0.3 * t
        fit = fit_C(self.Series(t, N, 0.7 * N), lam=1.0)
        assert fit.slope == pytest.approx(0.7, abs=1e-12)
        assert fit.residual < 1e-12

    def test_too_few_points(self):
        t = np.linspace(1, 10, 10)
        with pytest.raises(ValueError):
            fit_C(self.Series(t, t, t), lam=1.0)

    def test_poor_fit_warns(self):
        t = np.linspace(20, 100, 20)
        with pytest.warns(PoorFitWarning):
            fit_C(self.Series(t, t, (t - 60) ** 2), lam=1.0)

    def test_h0_gives_zero(self):
        init = H0InitialState.from_probabilities([0, 1], [0.5, 0.5])
        t = np.linspace(20, 100, 9)
        s = [spread_h0(init, 1.0, x) for x in t]
        series = self.Series(t, np.array([x.meanN_bar for x in s]), np.array([x.sigma2_bar for x in s]))
        # sigma2 is pure quadrature noise here, so the relative residual is meaningless
        with pytest.warns(PoorFitWarning):
            fit = fit_C(series, 1.0, min_lambda_t=20)
        assert abs(fit.slope) < 1e-6

    def test_stable_under_doubling(self):
        p = ModelParams(1.0, 0.5, 2.0)
        fits = []
        for n, seed in ((1500, 1), (3000, 2)):
            run = simulate_ensemble(p, 500, 0.05, Scheme.PHYSICAL, seed, n, stride=10)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PoorFitWarning)
                fits.append(fit_C(run.stats(), p.lam).slope)
        assert fits[0] > 0 and math.isfinite(fits[0])
        assert fits[1] == pytest.approx(fits[0], rel=0.25)


class TestDeltaR:
    R = SPEED_OF_LIGHT_M_S * TEN_BILLION_YEARS_S

    def test_order_of_magnitude(self):
        cm = 100 * delta_R_estimate(1.0, self.R)
        assert 1e-3 < cm < 1e-2
        assert cm == pytest.approx(100 * math.sqrt(self.R * PLANCK_LENGTH_M))

    def test_zero(self):
        assert delta_R_estimate(0.0, self.R) == 0.0

    def test_sixth_root(self):
        assert delta_R_estimate(64.0, self.R) == pytest.approx(2 * delta_R_estimate(1.0, self.R))

    def test_negative(self):
        with pytest.raises(ValueError):
            delta_R_estimate(-1.0, self.R)


class TestEngine:
    def test_csv_header(self, tmp_path):
        rec = simulate_trajectory(ModelParams(1.0, 0.5, 2.0, n_max=20), 10, 0.1, seed=2)
        f = tmp_path / "traj.csv"
        rec.to_csv(f)
        lines = f.read_text().splitlines()
        assert lines[0] == "t,log_norm2,meanN,meanN2,sigma2" and len(lines) == 11

    def test_sigma2_consistent(self):
        rec = simulate_trajectory(ModelParams(1.0, 0.5, 2.0, n_max=30), 300, 0.05, seed=4)
        assert np.all(rec.sigma2 >= -1e-12)
        assert np.allclose(rec.sigma2, rec.meanN2 - rec.meanN ** 2, atol=1e-9)

    def test_truncation_grows(self):
        p = ModelParams(0.0, 1.0, 1.0, n_max=4)
        rec = simulate_trajectory(p, 100, 0.05, seed=3)
        assert rec.n_max > 4 and rec.leakage <= 1e-8

    def test_truncation_strict(self):
        with pytest.raises(LeakageError):
            simulate_trajectory(ModelParams(0.0, 1.0, 1.0, n_max=4), 100, 0.05, seed=3, grow=False)

    def test_suggest_n_max(self):
        p = ModelParams(1.0, 0.5, 2.0)
        m = mean_N_analytic(CosmoAnalytic(1.0, 0.5, 2.0), 100.0)
        assert suggest_n_max(p, 100.0) == max(16, math.ceil(4 * m + 10 * math.sqrt(m)))

    def test_stride_must_divide(self):
        with pytest.raises(ValueError):
            simulate_trajectory(ModelParams(1.0, 0.5, 2.0), 10, 0.1, stride=3)

    def test_ensemble_record_equals_trajectory(self):
        p = ModelParams(1.0, 0.5, 2.0)
        run = simulate_ensemble(p, 50, 0.1, Scheme.PHYSICAL, 77, 5)
        from chronocollapse.noise import derive_seed

        rec = simulate_trajectory(run.params, 50, 0.1, Scheme.PHYSICAL, derive_seed(77, 0, 3))
        # batched and single-row products may round differently in the last bit
        assert np.allclose(run.record(3).meanN, rec.meanN, rtol=0, atol=1e-12)

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert worker_count() == 3
        monkeypatch.setenv(THREADS_ENV, "junk")
        assert worker_count() == 1
        assert worker_count(5) == 5

    def test_thread_count_invariance(self, monkeypatch):
        p = ModelParams(1.0, 0.5, 2.0)
        runs = []
        for n in ("1", "4"):
            monkeypatch.setenv(THREADS_ENV, n)
            runs.append(simulate_ensemble(p, 100, 0.05, Scheme.PHYSICAL, 5, 300, chunk_size=64, stride=10))
        for name in ("meanN", "meanN2", "log_norm2"):
            assert np.array_equal(getattr(runs[0].result, name), getattr(runs[1].result, name))

    def test_worker_error_names_index(self, monkeypatch):
        from chronocollapse import cosmo

        real = cosmo.evolve_batch

        def broken(p, steps, dt, scheme, seeds, *a, **k):
            if len(seeds) and int(seeds[0]) == int(bad):
                raise RuntimeError("boom")
            return real(p, steps, dt, scheme, seeds, *a, **k)

        from chronocollapse.noise import derive_seed

        bad = derive_seed(3, 0, 8)
        monkeypatch.setattr(cosmo, "evolve_batch", broken)
        with pytest.raises(WorkerError) as info:
            simulate_ensemble(ModelParams(1.0, 0.5, 2.0), 10, 0.1, Scheme.PHYSICAL, 3, 16, chunk_size=4,
                              workers=2)
        assert info.value.index == 8
