"""The clock sector: a second, uncoupled collapse-driven oscillator.

The clock has its own constants (eps', g', lam'), its own number operator M'
and its own noise w'. Since nothing couples the two sectors, a joint
trajectory is just two independent trajectories whose seeds come from
distinct streams of the same master seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import CosmoAnalytic, FitResult, delta_T_estimate, fit_C, mean_N_analytic
from .constants import N_BATCHES
from .cosmo import EnsembleRun, TrajectoryRecord, simulate_ensemble, simulate_trajectory
from .fock import ModelParams
from .noise import CLOCK_STREAM, SPACE_STREAM, Scheme, derive_seed
from .stats import EnsembleStats

__all__ = [
    "ClockParams",
    "JointRecord",
    "JointEnsemble",
    "simulate_joint",
    "simulate_joint_ensemble",
    "clock_calibration",
    "clock_mean_analytic",
    "delta_T_estimate",
    "factorization_covariance",
    "factorization_permutation_test",
    "size_age_correlation",
    "oscillation_frequency",
]


@dataclass(frozen=True)
class ClockParams:
    epsilon_p: float = 0.0
    g_p: float = 0.0
    lambda_p: float = 0.0
    n_max: int = 16

    def __post_init__(self):
        # reuse the space-sector validation
        self.to_model()

    def to_model(self, K: int = 1) -> ModelParams:
        return ModelParams(epsilon=self.epsilon_p, g=self.g_p, lam=self.lambda_p, K=K, n_max=self.n_max)

    def analytic(self) -> CosmoAnalytic:
        return CosmoAnalytic(self.epsilon_p, self.g_p, self.lambda_p)


@dataclass
class JointRecord:
    space: TrajectoryRecord
    clock: TrajectoryRecord


def simulate_joint(p: ModelParams, c: ClockParams, steps: int, dt: float, seed: int,
                   scheme=Scheme.PHYSICAL, index: int = 0, stride: int = 1,
                   method: str = "mixture") -> JointRecord:
    """Trajectory ``index`` of both sectors under master ``seed``."""
    rs = simulate_trajectory(p, steps, dt, scheme, derive_seed(seed, SPACE_STREAM, index),
                             stride=stride, method=method)
    rc = simulate_trajectory(c.to_model(), steps, dt, scheme, derive_seed(seed, CLOCK_STREAM, index),
                             stride=stride, method=method)
    return JointRecord(rs, rc)


@dataclass
class JointEnsemble:
    space: EnsembleRun
    clock: EnsembleRun

    @property
    def times(self) -> np.ndarray:
        return self.space.times

    @property
    def n_traj(self) -> int:
        return self.space.n_traj


def simulate_joint_ensemble(p: ModelParams, c: ClockParams, steps: int, dt: float, master_seed: int,
                            n_traj: int, scheme=Scheme.PHYSICAL, stride: int = 1,
                            method: str = "mixture", workers: int | None = None) -> JointEnsemble:
    kw = dict(stride=stride, method=method, workers=workers)
    s = simulate_ensemble(p, steps, dt, scheme, master_seed, n_traj, stream=SPACE_STREAM, **kw)
    k = simulate_ensemble(c.to_model(), steps, dt, scheme, master_seed, n_traj, stream=CLOCK_STREAM, **kw)
    return JointEnsemble(s, k)


def clock_mean_analytic(c: ClockParams, t):
    """Mean clock reading; literally the space growth law with primed constants."""
    return mean_N_analytic(c.analytic(), t)


def clock_calibration(stats_clock: EnsembleStats, lambda_p: float, min_lambda_t: float = 20.0) -> FitResult:
    """C' from the clock sector's late-time spread."""
    return fit_C(stats_clock, lambda_p, min_lambda_t)


def _batch_means(run: EnsembleRun, n_batches: int, values=None) -> np.ndarray:
    """Per-batch unweighted means (batch = trajectory index mod n_batches)."""
    if run.scheme is not Scheme.PHYSICAL:
        raise ValueError("joint statistics are defined for the physical scheme")
    x = run.result.meanN if values is None else values
    b = np.arange(x.shape[0]) % n_batches
    return np.array([x[b == j].mean(axis=0) for j in range(n_batches)])


@dataclass
class CovarianceReport:
    times: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.stderr > 0, self.cov / self.stderr, 0.0)


def factorization_covariance(joint: JointEnsemble, f: str = "meanN", g: str = "meanN") -> CovarianceReport:
    """E[f(space) g(clock)] - E[f] E[g] per time.

    Joint records are i.i.d., so the error is the plain standard error of the
    centred products.
    """
    x = getattr(joint.space.result, f)
    y = getattr(joint.clock.result, g)
    if x.shape != y.shape:
        raise ValueError("sectors have different shapes")
    prod = (x - x.mean(axis=0)) * (y - y.mean(axis=0))
    n = x.shape[0]
    cov = prod.sum(axis=0) / n
    return CovarianceReport(joint.times, cov, prod.std(axis=0, ddof=1) / math.sqrt(n))


def _max_abs_z(xs, ys) -> float:
    n = xs[0].shape[0]
    out = 0.0
    for x in xs:
        xc = x - x.mean(axis=0)
        for y in ys:
            prod = xc * (y - y.mean(axis=0))
            se = prod.std(axis=0, ddof=1) / math.sqrt(n)
            z = np.where(se > 0, prod.mean(axis=0) / np.where(se > 0, se, 1.0), 0.0)
            out = max(out, float(np.max(np.abs(z))))
    return out


def factorization_permutation_test(joint: JointEnsemble, n_perm: int = 200, seed: int = 0,
                                   observables=("meanN", "meanN2")) -> tuple[float, float]:
    """Max |z| of the covariances over all times and observable pairs, with its permutation p-value.

    Re-pairing space record i with clock record pi(i) destroys any dependence
    between sectors while keeping both marginals, which calibrates the
    maximum over a strongly time-correlated curve.
    """
    xs = [getattr(joint.space.result, f) for f in observables]
    ys = [getattr(joint.clock.result, f) for f in observables]
    obs = _max_abs_z(xs, ys)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(n_perm):
        pi = rng.permutation(xs[0].shape[0])
        exceed += _max_abs_z(xs, [y[pi] for y in ys]) >= obs
    return obs, (exceed + 1) / (n_perm + 1)


@dataclass
class SizeAgeReport:
    times: np.ndarray
    meanN_bar: np.ndarray
    meanMp_bar: np.ndarray
    ratio: np.ndarray
    ratio_err: np.ndarray
    slope: float
    slope_err: float
    intercept: float
    intercept_err: float
    band: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,meanN_bar,meanMp_bar,slope,slope_err\n")
            for row in zip(self.times, self.meanN_bar, self.meanMp_bar, self.ratio, self.ratio_err):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _line(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (b, a), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(b), float(a)


def size_age_correlation(joint: JointEnsemble, lam: float, lambda_p: float, min_lambda_t: float = 20.0,
                         n_batches: int = N_BATCHES, min_records: int = 1000) -> SizeAgeReport:
    """Fit meanN-bar = slope * meanM'-bar + intercept over the late window.

    Per-time rows give the local ratio meanN-bar / meanM'-bar. Errors come
    from refitting each batch; ``band`` is the sqrt of the summed per-sector
    mean spreads.
    """
    if joint.n_traj < min_records:
        raise ValueError(f"need >= {min_records} joint records")
    t = joint.times
    sel = (min(lam, lambda_p) * t) >= min_lambda_t
    if sel.sum() < 2:
        raise ValueError("fewer than two times in the late window")
    N = joint.space.result.meanN.mean(axis=0)
    M = joint.clock.result.meanN.mean(axis=0)
    bN = _batch_means(joint.space, n_batches)
    bM = _batch_means(joint.clock, n_batches)
    slope, icpt = _line(M[sel], N[sel])
    fits = np.array([_line(bM[j][sel], bN[j][sel]) for j in range(n_batches)])
    serr = fits.std(axis=0, ddof=1) / math.sqrt(n_batches)
    ratio = N / M
    ratio_err = (bN / bM).std(axis=0, ddof=1) / math.sqrt(n_batches)
    band = np.sqrt(joint.space.result.sigma2.mean(axis=0) + joint.clock.result.sigma2.mean(axis=0))
    return SizeAgeReport(t, N, M, ratio, ratio_err, slope, float(serr[0]), icpt, float(serr[1]), band)


def oscillation_frequency(times, values, window: float) -> tuple[float, float]:
    """Angular frequency of the spectral peak of ``values`` minus its running mean.

    ``window`` is the running-mean length in time units. Returns the peak
    frequency and the bin width 2 pi / span of the analysed segment.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    dt = float(np.mean(np.diff(times)))
    k = max(3, int(round(window / dt)) | 1)
    if k >= values.size:
        raise ValueError("window longer than the series")
    run = np.convolve(values, np.ones(k) / k, mode="valid")
    h = k // 2
    resid = values[h : h + run.size] - run
    resid = resid - resid.mean()
    spec = np.abs(np.fft.rfft(resid)) ** 2
    freqs = 2.0 * math.pi * np.fft.rfftfreq(resid.size, d=dt)
    j = 1 + int(np.argmax(spec[1:]))
    return float(freqs[j]), float(freqs[1])
