import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from chronocollapse.fock import (
    FockVector,
    ModelParams,
    TruncationWarning,
    apply_annihilation,
    apply_creation,
    collapse_step,
    get_propagator,
    hamiltonian_apply,
    hamiltonian_matrix,
    number_apply,
    unitary_step,
)


def vec(*amps):
    return FockVector(np.array(amps, dtype=complex))


def random_state(seed, dim):
    rng = np.random.default_rng(seed)
    return FockVector(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


states = st.builds(random_state, st.integers(0, 2 ** 32), st.integers(2, 24))


class TestParams:
    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            ModelParams(lam=-1.0)

    @pytest.mark.parametrize("kw", [{"K": 0}, {"n_max": 0}, {"tau": 2.0}, {"epsilon": math.nan}])
    def test_rejects_bad_fields(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


class TestLadder:
    def test_annihilate_vacuum(self):
        out = apply_annihilation(FockVector.vacuum(4))
        assert np.all(out.amplitudes == 0)

    def test_annihilate_one(self):
        out = apply_annihilation(FockVector.basis(1, 4))
        assert out.amplitudes[0] == 1 and np.all(out.amplitudes[1:] == 0)

    def test_annihilate_three(self):
        out = apply_annihilation(FockVector.basis(3, 5))
        assert out.amplitudes[2] == pytest.approx(math.sqrt(3))

    def test_annihilate_top_has_no_inflow(self):
        out = apply_annihilation(FockVector.basis(4, 4))
        assert out.amplitudes[-1] == 0

    def test_create_vacuum(self):
        out = apply_creation(FockVector.vacuum(4))
        assert out.amplitudes[1] == 1 and out.leaked == 0

    def test_create_two(self):
        out = apply_creation(FockVector.basis(2, 5))
        assert out.amplitudes[3] == pytest.approx(math.sqrt(3))

    def test_creation_drops_and_counts_top(self):
        with pytest.warns(TruncationWarning):
            out = apply_creation(FockVector.basis(3, 3))
        assert np.all(out.amplitudes == 0)
        # |a^dag|3>|^2 = 4 of the original unit norm left the space
        assert out.leaked == pytest.approx(4.0)

    @given(states)
    def test_commutator(self, v):
        a = v.amplitudes.copy()
        a[-2:] = 0
        v = FockVector(a)
        aad = apply_annihilation(apply_creation(v)).amplitudes
        ada = apply_creation(apply_annihilation(v)).amplitudes
        lhs = np.vdot(a, aad) - np.vdot(a, ada)
        assert abs(lhs - np.vdot(a, a)) <= 1e-12 * max(1.0, np.vdot(a, a).real)


class TestHamiltonian:
    def test_number_eigenstate(self):
        out = hamiltonian_apply(FockVector.basis(3, 6), ModelParams(epsilon=0.7))
        assert out.amplitudes[3] == pytest.approx(2.1)
        assert np.count_nonzero(out.amplitudes) == 1

    def test_vacuum_with_pure_coupling(self):
        out = hamiltonian_apply(FockVector.vacuum(4), ModelParams(g=1.5))
        assert np.allclose(out.amplitudes, [0, 1.5, 0, 0, 0])

    def test_mixed_example(self):
        out = hamiltonian_apply(FockVector.basis(1, 4), ModelParams(epsilon=1, g=2))
        assert np.allclose(out.amplitudes, [2, 1, 2 * math.sqrt(2), 0, 0])

    def test_matrix_matches_action(self):
        p = ModelParams(epsilon=0.3, g=1.1, n_max=7)
        v = random_state(5, 8)
        assert np.allclose(hamiltonian_matrix(0.3, 1.1, 7) @ v.amplitudes, hamiltonian_apply(v, p).amplitudes)

    @given(st.integers(0, 2 ** 32), st.floats(-3, 3), st.floats(-3, 3))
    def test_hermitian(self, seed, eps, g):
        p = ModelParams(epsilon=eps, g=g, n_max=12)
        u, v = random_state(seed, 13), random_state(seed + 1, 13)
        lhs = u.inner(hamiltonian_apply(v, p))
        rhs = np.conj(v.inner(hamiltonian_apply(u, p)))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestUnitary:
    def test_free_phases(self):
        p = ModelParams(epsilon=0.8, n_max=5)
        v = random_state(1, 6)
        out = unitary_step(v, p, 0.3)
        n = np.arange(6)
        assert np.allclose(out.amplitudes, v.amplitudes * np.exp(-1j * 0.8 * n * 0.3), atol=1e-14)

    def test_zero_dt_is_identity(self):
        v = random_state(2, 6)
        assert unitary_step(v, ModelParams(epsilon=1, g=1, n_max=5), 0.0) is v

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            unitary_step(FockVector.vacuum(3), ModelParams(g=1, n_max=3), -0.1)

    def test_expm_oracle(self):
        n_max = 30
        p = ModelParams(epsilon=1, g=1, n_max=n_max)
        out = unitary_step(FockVector.vacuum(n_max), p, 0.1)
        ref = expm(-1j * 0.1 * hamiltonian_matrix(1, 1, n_max))[:, 0]
        assert np.max(np.abs(out.amplitudes - ref)) <= 1e-10

    def test_propagator_cached(self):
        assert get_propagator(1.0, 0.5, 9) is get_propagator(1.0, 0.5, 9)
        u = get_propagator(1.0, 0.5, 9).matrix(0.05)
        assert u is get_propagator(1.0, 0.5, 9).matrix(0.05)
        assert not u.flags.writeable

    @settings(max_examples=50)
    @given(states, st.floats(0, 10), st.floats(-2, 2), st.floats(-2, 2))
    def test_norm_preserved(self, v, dt, eps, g):
        p = ModelParams(epsilon=eps, g=g, n_max=v.n_max)
        out = unitary_step(v, p, dt)
        assert out.raw_norm2() == pytest.approx(v.raw_norm2(), rel=1e-12)

    @settings(max_examples=50)
    @given(states, st.floats(0, 5), st.floats(0, 5))
    def test_composition(self, v, dt1, dt2):
        p = ModelParams(epsilon=0.7, g=0.4, n_max=v.n_max)
        two = unitary_step(unitary_step(v, p, dt1), p, dt2).amplitudes
        one = unitary_step(v, p, dt1 + dt2).amplitudes
        assert np.max(np.abs(two - one)) <= 1e-10 * math.sqrt(v.raw_norm2())


class TestCollapse:
    def test_eigenvalue_noise_leaves_ray(self):
        p = ModelParams(lam=0.8, n_max=6)
        v = FockVector.basis(2, 6)
        out = collapse_step(v, 2 * 0.8 * 2, p, 0.1)
        assert np.allclose(out.normalized(), v.normalized())
        assert out.log_norm2() == pytest.approx(0.0, abs=1e-15)

    def test_large_rate_kills_excitations(self):
        v = random_state(3, 5)
        prev = None
        for dt in (0.1, 0.2, 0.4):
            out = collapse_step(v, 0.0, ModelParams(lam=50.0, n_max=4), dt)
            pr = out.probabilities()
            if prev is not None:
                assert np.all(pr[1:] <= prev[1:])
            prev = pr
        assert prev[0] > 1 - 1e-12

    def test_gaussian_ratio(self):
        lam, dt, w = 0.6, 0.3, 1.7
        p = ModelParams(lam=lam, n_max=4)
        out = collapse_step(vec(0, 1, 0, 1, 0), w, p, dt).represented()
        expect = math.exp(-dt * ((w - 2 * lam) ** 2 - (w - 6 * lam) ** 2) / (4 * lam))
        assert abs(out[1] / out[3]) == pytest.approx(expect, rel=1e-13)

    def test_requires_positive_rate(self):
        with pytest.raises(ValueError):
            collapse_step(FockVector.vacuum(3), 0.0, ModelParams(n_max=3), 0.1)

    @given(states, st.floats(-20, 20), st.floats(-20, 20), st.floats(0.01, 3))
    def test_collapses_commute(self, v, w1, w2, lam):
        p = ModelParams(lam=lam, n_max=v.n_max)
        a = collapse_step(collapse_step(v, w1, p, 0.1), w2, p, 0.1)
        b = collapse_step(collapse_step(v, w2, p, 0.1), w1, p, 0.1)
        # diagonal factors commute; equal up to the rounding of exp(f1 - top1) * exp(f2 - top2)
        assert np.allclose(a.represented(), b.represented(), rtol=4e-15, atol=0)

    def test_number_apply(self):
        assert np.allclose(number_apply(vec(1, 1, 1)).amplitudes, [0, 1, 2])


class TestRescale:
    @given(states, st.integers(-450, 450))
    def test_ray_invariant(self, v, e):
        v = FockVector(np.ldexp(v.amplitudes.real, e) + 1j * np.ldexp(v.amplitudes.imag, e))
        r = v.rescaled(force=True)
        assert np.allclose(r.normalized(), v.normalized(), rtol=1e-15, atol=1e-15)
        assert np.allclose(r.amplitudes[1:] / r.amplitudes[0], v.amplitudes[1:] / v.amplitudes[0], rtol=1e-15, atol=0)
        assert r.log_norm2() == pytest.approx(v.log_norm2(), rel=1e-15, abs=1e-12)

    def test_tiny_vector_keeps_scale(self):
        v = FockVector(np.array([1e-200, 2e-200], dtype=complex))
        r = v.rescaled()
        assert 0.5 <= np.max(np.abs(r.amplitudes)) < 1.0
        assert r.log_norm2() == pytest.approx(math.log(5.0) - 400 * math.log(10.0), rel=1e-14)

    def test_zero_vector(self):
        from chronocollapse.fock import DegenerateStateError

        with pytest.raises(DegenerateStateError):
            FockVector(np.zeros(3)).rescaled(force=True)

    def test_underflow_survives_long_collapse(self):
        p = ModelParams(lam=1.0, n_max=3)
        v = FockVector.basis(1, 3)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            for _ in range(5000):
                v = collapse_step(v, 40.0, p, 1.0)
        assert math.isfinite(v.log_norm2()) and v.log_norm2() < -1e5
        assert v.probabilities()[1] == 1.0
