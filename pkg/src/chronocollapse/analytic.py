"""Closed-form companions of the growth model and the ensemble oracles.

Growth law of the ensemble mean size (lam > 0)::

    N(t) = g^2 / (eps^2 + (lam/2)^2) * [lam t + 2 exp(-lam t/2) cos(eps t + 2 phi) - 2 cos 2phi]

with tan(phi) = 2 eps / lam. The lam = 0 corners are dispatched to their own
expressions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .constants import PLANCK_LENGTH_M, PLANCK_TIME_S, POOR_FIT_RESIDUAL
from .fock import ModelParams, get_propagator


class FormulaError(ArithmeticError):
    """A closed form returned a value its derivation forbids."""


class PoorFitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CosmoAnalytic:
    epsilon: float
    g: float
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    @classmethod
    def from_params(cls, p: ModelParams) -> "CosmoAnalytic":
        return cls(p.epsilon, p.g, p.lam)

    @property
    def phi(self) -> float:
        if self.lam == 0:
            return math.pi / 2
        return math.atan(2.0 * self.epsilon / self.lam)

    @property
    def growth_rate(self) -> float:
        """Late-time slope g^2 lam / (eps^2 + (lam/2)^2); 0 without collapse."""
        if self.lam == 0:
            return 0.0
        return self.g ** 2 * self.lam / (self.epsilon ** 2 + (self.lam / 2) ** 2)


def no_collapse_mean_N(epsilon: float, g: float, t):
    """<N>(t) of H = eps N + g(a + a^dag) from vacuum without collapse."""
    t = np.asarray(t, dtype=float)
    if epsilon == 0:
        return (g * t) ** 2
    return (2.0 * g / epsilon) ** 2 * np.sin(epsilon * t / 2.0) ** 2


def mean_N_analytic(a: CosmoAnalytic, t):
    t_arr = np.asarray(t, dtype=float)
    if a.lam == 0:
        out = no_collapse_mean_N(a.epsilon, a.g, t_arr)
    else:
        pref = a.g ** 2 / (a.epsilon ** 2 + (a.lam / 2) ** 2)
        phi = a.phi
        bracket = (a.lam * t_arr + 2.0 * np.exp(-a.lam * t_arr / 2.0) * np.cos(a.epsilon * t_arr + 2.0 * phi)
                   - 2.0 * math.cos(2.0 * phi))
        out = pref * bracket
        if np.any(out < -1e-12 * max(pref, 1.0)):
            raise FormulaError(f"growth law went negative: min {np.min(out)}")
        out = np.maximum(out, 0.0)
    return float(out) if np.ndim(t) == 0 else out


def mean_N2_asymptotic(a: CosmoAnalytic, t):
    """Leading large-t behaviour 2 (g^2 lam t / (eps^2 + (lam/2)^2))^2 of <N^2>-bar."""
    t = np.asarray(t, dtype=float)
    out = 2.0 * (a.growth_rate * t) ** 2
    return float(out) if out.ndim == 0 else out


def ratio_term_oracle(a: CosmoAnalytic, t, sigma2_of_ensemble_mean):
    """Gaussian-approximation prediction sigma^2 + N-bar(t)^2 of mean(<N>^2/<1>).

    ``sigma2_of_ensemble_mean`` is <N^2>-bar - <N>-bar^2, the variance of the
    size across the ensemble (not the mean per-trajectory spread).
    """
    return np.asarray(sigma2_of_ensemble_mean) + np.asarray(mean_N_analytic(a, t)) ** 2


@dataclass
class CoherentOracle:
    """Coherent-state solution exp(gamma + alpha a^dag)|0> without collapse."""

    times: np.ndarray
    alpha_t: np.ndarray
    gamma_t: np.ndarray

    @classmethod
    def solve(cls, epsilon: float, g: float, times, rtol: float = 1e-12, atol: float = 1e-14) -> "CoherentOracle":
        """Integrate d alpha/dt = -i g - i eps alpha, d gamma/dt = -i g alpha numerically."""
        times = np.asarray(times, dtype=float)

        def rhs(_, y):
            al = y[0] + 1j * y[1]
            dal = -1j * g - 1j * epsilon * al
            dga = -1j * g * al
            return [dal.real, dal.imag, dga.real, dga.imag]

        sol = solve_ivp(rhs, (0.0, float(times[-1])), [0.0, 0.0, 0.0, 0.0], t_eval=times,
                        method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(sol.message)
        return cls(times, sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3])

    @property
    def mean_N(self) -> np.ndarray:
        return np.abs(self.alpha_t) ** 2

    @property
    def log_norm2(self) -> np.ndarray:
        """2 Re(gamma) + |alpha|^2; zero for unitary evolution."""
        return 2.0 * self.gamma_t.real + np.abs(self.alpha_t) ** 2

    def fock_amplitudes(self, k: int, n_max: int) -> np.ndarray:
        n = np.arange(n_max + 1)
        logfact = np.array([math.lgamma(j + 1) for j in n])
        al = self.alpha_t[k]
        if al == 0:
            out = np.zeros(n_max + 1, dtype=complex)
            out[0] = np.exp(self.gamma_t[k])
            return out
        return np.exp(self.gamma_t[k] + n * np.log(al + 0j) - 0.5 * logfact)


def averaged_moments(p: ModelParams, dt: float, steps: int, stride: int = 1):
    """Ensemble <N>-bar and <N^2>-bar of the discrete model, without sampling.

    Averaging over w turns one step into rho -> D(U rho U^dag) with
    D_nm = exp(-lam dt (n-m)^2 / 2); this iterates that map on a density matrix.
    """
    d = p.n_max + 1
    n = np.arange(d, dtype=float)
    U = get_propagator(p.epsilon, p.g, p.n_max).matrix(dt)
    D = np.exp(-p.lam * dt * (n[:, None] - n[None, :]) ** 2 / 2.0)
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    out_t, out_m, out_m2, out_top = [], [], [], []
    for k in range(1, steps + 1):
        rho = D * (U @ rho @ U.conj().T)
        if k % stride == 0:
            diag = rho.diagonal().real
            out_t.append(k * dt)
            out_m.append(diag @ n)
            out_m2.append(diag @ (n * n))
            out_top.append(diag[-1])
    return np.array(out_t), np.array(out_m), np.array(out_m2), float(max(out_top))


@dataclass
class FitResult:
    slope: float
    residual: float
    n_points: int


def fit_C(stats, lam: float, min_lambda_t: float = 20.0, min_points: int = 5) -> FitResult:
    """Least-squares C in sigma2_bar = C * meanN_bar over the late-time window.

    ``residual`` is ||sigma2 - C N|| / ||sigma2||; above 20% a PoorFitWarning
    is issued.
    """
    times = np.asarray(stats.times)
    sel = lam * times >= min_lambda_t
    if sel.sum() < min_points:
        raise ValueError(f"need >= {min_points} points with lam t >= {min_lambda_t}, have {int(sel.sum())}")
    x = np.asarray(stats.meanN_bar)[sel]
    y = np.asarray(stats.sigma2_bar)[sel]
    slope = float(x @ y / (x @ x))
    ny = float(np.linalg.norm(y))
    resid = float(np.linalg.norm(y - slope * x) / ny) if ny > 0 else 0.0
    if resid > POOR_FIT_RESIDUAL:
        warnings.warn(f"sigma2 is not proportional to N over the window (residual {resid:.2f})",
                      PoorFitWarning, stacklevel=2)
    return FitResult(slope, resid, int(sel.sum()))


def delta_R_estimate(C: float, R_universe: float, planck_length: float = PLANCK_LENGTH_M) -> float:
    """Size uncertainty C^(1/6) sqrt(R l); same length unit as ``R_universe`` (metres by default)."""
    if C < 0 or R_universe <= 0:
        raise ValueError("need C >= 0 and R > 0")
    return C ** (1.0 / 6.0) * math.sqrt(R_universe * planck_length)


def delta_T_estimate(C_prime: float, T_age: float, planck_time: float = PLANCK_TIME_S) -> float:
    """Age uncertainty C'^(1/2) sqrt(T tau) in seconds."""
    if C_prime < 0 or T_age <= 0:
        raise ValueError("need C' >= 0 and T > 0")
    return math.sqrt(C_prime) * math.sqrt(T_age * planck_time)
