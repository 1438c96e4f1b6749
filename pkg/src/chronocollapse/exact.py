"""Exact constructions: the discrete instant product and the H = 0 collapse analytics.

With H = 0 the noise enters only through B(t) = int w, and the distribution
of B(t) is a Gaussian mixture with components (|alpha_n|^2, 2 lam t n, lam t).
Everything here is evaluated either in closed form or by windowed adaptive
quadrature; nothing is sampled.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .constants import DEFAULT_R, LEAKAGE_TOL, QUAD_ABS_TOL, WINDOW_SIGMAS
from .fock import FockVector, LeakageError, ModelParams, collapse_step, unitary_step
from .noise import NoisePath
from .stats import InequalityChainError


class OverlapWarning(UserWarning):
    """Born windows of neighbouring components overlap (lam t dn^2 < R^2)."""


@dataclass(frozen=True)
class H0InitialState:
    support: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=int)
        al = np.asarray(self.alphas, dtype=complex)
        if sup.shape != al.shape or sup.ndim != 1 or sup.size == 0:
            raise ValueError("support and alphas must be equal-length 1-D arrays")
        if np.any(sup < 0) or np.unique(sup).size != sup.size:
            raise ValueError("support must be distinct non-negative integers")
        if abs(np.sum(np.abs(al) ** 2) - 1.0) > 1e-12:
            raise ValueError("sum |alpha_n|^2 must be 1")
        order = np.argsort(sup)
        object.__setattr__(self, "support", sup[order])
        object.__setattr__(self, "alphas", al[order])

    @classmethod
    def from_probabilities(cls, support, probs, phases=None) -> "H0InitialState":
        probs = np.asarray(probs, dtype=float)
        probs = probs / probs.sum()
        al = np.sqrt(probs).astype(complex)
        if phases is not None:
            al = al * np.exp(1j * np.asarray(phases, dtype=float))
        return cls(np.asarray(support), al)

    @property
    def probs(self) -> np.ndarray:
        return np.abs(self.alphas) ** 2

    def to_fock(self, n_max: int | None = None) -> FockVector:
        n_max = int(self.support.max()) if n_max is None else n_max
        n_max = max(n_max, 1)
        if self.support.max() > n_max:
            raise ValueError("support exceeds n_max")
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[self.support] = self.alphas
        return FockVector(amps)

    def mixture(self, lam: float, t: float) -> "GaussianMixture":
        return GaussianMixture(self.probs, 2.0 * lam * t * self.support, lam * t)


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    centers: np.ndarray
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be > 0")
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.centers) / self.sd
        return np.exp(-0.5 * z * z) @ self.weights / math.sqrt(2.0 * math.pi * self.variance)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return ndtr((x[..., None] - self.centers) / self.sd) @ self.weights

    def mean(self) -> float:
        return float(self.weights @ self.centers)

    def domain(self, sigmas: float = WINDOW_SIGMAS) -> tuple[float, float]:
        return float(self.centers.min() - sigmas * self.sd), float(self.centers.max() + sigmas * self.sd)


@dataclass
class InstantState:
    """Instant m and the S-state sqrt(K) <m|Psi>."""

    m: int
    state: FockVector

    def norm2(self, K: int) -> float:
        """Squared norm of <m|Psi> itself (includes the 1/K)."""
        return math.exp(self.state.log_norm2()) / K


def build_instants(p: ModelParams, path: NoisePath | None, init: FockVector,
                   leak_tol: float = LEAKAGE_TOL) -> list[InstantState]:
    """Instants m = 0..K-1; instant m carries m factors exp(-tau G) exp(-i tau H).

    ``path`` may be None when lam == 0 (no collapse, so no noise is read).
    """
    K = p.K
    if p.lam > 0:
        if path is None or path.steps < K - 1:
            raise ValueError(f"need a noise path with >= {K - 1} steps")
        if path.dt != p.tau:
            raise ValueError("instants are one tau apart; path.dt must equal tau")
    v = init
    out = [InstantState(0, v)]
    for m in range(1, K):
        v = unitary_step(v, p, p.tau)
        if p.lam > 0:
            v = collapse_step(v, float(path.values[m - 1]), p, p.tau)
        if p.g != 0 and v.truncation_leakage() > leak_tol:
            raise LeakageError(f"instant {m}: leakage {v.truncation_leakage():.3e} at n_max={v.n_max}")
        out.append(InstantState(m, v))
    return out


def instant_table(instants: list[InstantState], K: int) -> np.ndarray:
    """Rows (m, norm2, meanN, sigmaN)."""
    rows = []
    for s in instants:
        m1, _ = s.state.moments()
        rows.append((s.m, s.norm2(K), m1, math.sqrt(max(s.state.variance_N(), 0.0))))
    return np.array(rows)


def write_instants_csv(path, instants: list[InstantState], K: int) -> None:
    with open(path, "w") as fh:
        fh.write("m,norm2,meanN,sigmaN\n")
        for m, n2, mn, sg in instant_table(instants, K):
            fh.write(f"{int(m)},{n2:.17g},{mn:.17g},{sg:.17g}\n")


def write_pdf_csv(path, B, density) -> None:
    with open(path, "w") as fh:
        fh.write("B,density\n")
        for b, d in zip(np.asarray(B), np.asarray(density)):
            fh.write(f"{b:.17g},{d:.17g}\n")


def evolve_closed_form(init: H0InitialState, B_t: float, t: float, lam: float,
                       n_max: int | None = None) -> FockVector:
    """sum_n alpha_n exp(-(B - 2 lam t n)^2 / (4 lam t)) |n>, without the C(t) factor."""
    if t <= 0 or lam <= 0:
        raise ValueError("need t > 0 and lam > 0")
    ex = -((B_t - 2.0 * lam * t * init.support) ** 2) / (4.0 * lam * t)
    top = float(ex.max())
    base = init.to_fock(n_max)
    amps = np.zeros_like(base.amplitudes)
    amps[init.support] = init.alphas * np.exp(ex - top)
    return FockVector(amps, log_scale=top).rescaled()


def pdf_B(init: H0InitialState, lam: float, t: float, B):
    if t <= 0:
        raise ValueError("t must be > 0")
    return init.mixture(lam, t).pdf(B)


def cdf_B(init: H0InitialState, lam: float, t: float, B):
    if t <= 0:
        raise ValueError("t must be > 0")
    return init.mixture(lam, t).cdf(B)


def _separated(init: H0InitialState, lam: float, t: float, R: float) -> bool:
    if init.support.size < 2:
        return True
    dn = np.diff(init.support).min()
    return lam * t * dn * dn >= R * R


def windows(init: H0InitialState, lam: float, t: float, R: float = DEFAULT_R) -> np.ndarray:
    """Rows (n, lo, hi) of the windows 2 lam t n +- R sqrt(lam t)."""
    h = R * math.sqrt(lam * t)
    c = 2.0 * lam * t * init.support
    return np.column_stack([init.support, c - h, c + h])


def classify_B(B, init: H0InitialState, lam: float, t: float, R: float = DEFAULT_R) -> np.ndarray:
    """Window label n for each B, or -1 when B falls in no window."""
    B = np.asarray(B, dtype=float)
    out = np.full(B.shape, -1, dtype=int)
    # later windows win ties; windows are disjoint when separated
    for n, lo, hi in windows(init, lam, t, R):
        out[(B >= lo) & (B <= hi)] = int(n)
    return out


def _quad(f, a, b, points=None) -> float:
    pts = None
    if points is not None:
        pts = [x for x in points if a < x < b] or None
    val, _ = integrate.quad(f, a, b, points=pts, epsabs=QUAD_ABS_TOL, epsrel=1e-10, limit=400)
    return float(val)


def born_window_probability(init: H0InitialState, lam: float, t: float, n_target: int,
                            R: float = DEFAULT_R) -> float:
    if n_target not in init.support:
        raise ValueError(f"{n_target} is not in the support")
    if not _separated(init, lam, t, R):
        warnings.warn(f"windows overlap at lam t = {lam * t:g}, R = {R:g}", OverlapWarning, stacklevel=2)
    mix = init.mixture(lam, t)
    c = 2.0 * lam * t * n_target
    h = R * math.sqrt(lam * t)
    return _quad(mix.pdf, c - h, c + h, points=list(mix.centers))


def joint_pdf_B(init: H0InitialState, lam: float, t1: float, t: float, B1, B):
    """Two-time density of (B(t1), B(t))."""
    if not 0 < t1 < t:
        raise ValueError("need 0 < t1 < t")
    t2 = t - t1
    B1 = np.asarray(B1, dtype=float)[..., None]
    B = np.asarray(B, dtype=float)[..., None]
    n = init.support
    e2 = -((B - B1 - 2.0 * lam * t2 * n) ** 2) / (2.0 * lam * t2)
    e1 = -((B1 - 2.0 * lam * t1 * n) ** 2) / (2.0 * lam * t1)
    return np.exp(e1 + e2) @ init.probs / (2.0 * math.pi * lam * math.sqrt(t1 * t2))


def hop_peak_density(p1: float, p2: float, lam: float, t1: float, t2: float, dn: float) -> float:
    """Two-time density with both records at the centres of their windows."""
    t = t1 + t2
    pref = 1.0 / (2.0 * math.pi * lam * math.sqrt(t1 * t2))
    return pref * (p1 * math.exp(-2.0 * lam * t * t / t2 * dn * dn)
                   + p2 * math.exp(-2.0 * lam * t * t1 / t2 * dn * dn))


def hop_peak_bound(p1: float, p2: float, lam: float, t1: float, t2: float, dn: float) -> float:
    pref = 1.0 / (2.0 * math.pi * lam * math.sqrt(t1 * t2))
    return pref * (p1 * math.exp(-8.0 * lam * t1 * dn * dn) + p2 * math.exp(-2.0 * lam * t1 * dn * dn))


def _interval_prob(a, b):
    """P(a < Z < b) for standard normal Z, accurate in either tail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.where(b <= 0, ndtr(b) - ndtr(a), ndtr(-a) - ndtr(-b))


@dataclass
class HopProbability:
    """Three evaluations of the hop probability n1 at t1 -> n2 at t1 + t2.

    ``closed_form``: the sinh approximation; ``window_integrals``: the two
    window integrals it approximates, done exactly; ``quadrature``: 2-D
    quadrature of the full two-time density over both windows.
    """

    closed_form: float
    window_integrals: float
    quadrature: float
    separated: bool
    long_interval: bool
    flags: list = field(default_factory=list)


def hop_closed_form(p1: float, p2: float, lam: float, t1: float, t2: float, dn: float, R: float) -> float:
    total = 0.0
    for pk, tk in ((p1, t1), (p2, t2)):
        x = 2.0 * abs(dn) * R * math.sqrt(lam * tk)
        ex = -2.0 * lam * tk * dn * dn
        # sinh(x) e^ex without overflow
        s = 0.5 * (math.exp(x + ex) - math.exp(-x + ex))
        total += s * pk / (math.sqrt(math.pi * lam * tk) * abs(dn))
    return total


def hop_window_integrals(p1: float, p2: float, lam: float, t1: float, t2: float, dn: float, R: float) -> float:
    s1, s2 = math.sqrt(lam * t1), math.sqrt(lam * t2)
    # y ~ N(-2 lam t2 dn, lam t2) over +-R s2, x ~ N(2 lam t1 dn, lam t1) over +-R s1
    m2 = 2.0 * lam * t2 * dn / s2
    m1 = 2.0 * lam * t1 * dn / s1
    a = p1 * float(_interval_prob(-R + m2, R + m2))
    b = p2 * float(_interval_prob(-R - m1, R - m1))
    return a + b


def hop_event_windows(lam, t1, t2, n1, n2, R) -> tuple[tuple[float, float], tuple[float, float]]:
    """Window for B(t1) around n1 and for B(t1 + t2) around n2."""
    t = t1 + t2
    h1, h2 = R * math.sqrt(lam * t1), R * math.sqrt(lam * t2)
    c1, c2 = 2.0 * lam * t1 * n1, 2.0 * lam * t * n2
    return (c1 - h1, c1 + h1), (c2 - h2, c2 + h2)


def hop_quadrature(init: H0InitialState, lam, t1, t2, n1, n2, R) -> float:
    (a1, b1), (a2, b2) = hop_event_windows(lam, t1, t2, n1, n2, R)
    t = t1 + t2
    s2 = math.sqrt(lam * t2)

    def inner(b1v):
        centers = b1v + 2.0 * lam * t2 * init.support
        pts = list(centers)
        return _quad(lambda b: float(joint_pdf_B(init, lam, t1, t, b1v, b)), a2, b2, points=pts)

    def inner_tiny(b1v):
        # nothing in the window within 40 sd of any component
        c = b1v + 2.0 * lam * t2 * init.support
        if np.all((c + 40 * s2 < a2) | (c - 40 * s2 > b2)):
            return 0.0
        return inner(b1v)

    pts1 = list(2.0 * lam * t1 * init.support)
    val, _ = integrate.quad(inner_tiny, a1, b1, points=[x for x in pts1 if a1 < x < b1] or None,
                            epsabs=1e-300, epsrel=1e-8, limit=200)
    return float(val)


def hop_probability(init: H0InitialState, lam: float, t1: float, t2: float, n1: int, n2: int,
                    R: float = DEFAULT_R) -> HopProbability:
    if n1 == n2:
        raise ValueError("n1 == n2 is not a hop")
    if init.support.size != 2 or set(init.support.tolist()) != {n1, n2}:
        raise ValueError("init must have exactly the two components n1, n2")
    if t1 <= 0 or t2 <= 0 or lam <= 0:
        raise ValueError("need lam, t1, t2 > 0")
    probs = dict(zip(init.support.tolist(), init.probs.tolist()))
    p1, p2 = probs[n1], probs[n2]
    dn = float(n2 - n1)
    sep = lam * t1 * dn * dn >= R * R
    long_ = t2 >= 10.0 * t1
    flags = []
    if not sep:
        flags.append("not_separated")
    if not long_:
        flags.append("t2_not_much_larger_than_t1")
    return HopProbability(
        closed_form=hop_closed_form(p1, p2, lam, t1, t2, dn, R),
        window_integrals=hop_window_integrals(p1, p2, lam, t1, t2, dn, R),
        quadrature=hop_quadrature(init, lam, t1, t2, n1, n2, R),
        separated=sep,
        long_interval=long_,
        flags=flags,
    )


@dataclass
class H0Spread:
    sigma2_bar: float
    meanN2_bar: float
    ratio_term: float
    meanN_bar: float


def _ratio_integrand(init: H0InitialState, lam: float, t: float):
    n = init.support.astype(float)
    p = init.probs
    c = 2.0 * lam * t * n
    v = lam * t
    norm = 1.0 / math.sqrt(2.0 * math.pi * v)

    def f(b):
        ex = -((b - c) ** 2) / (2.0 * v)
        top = ex.max()
        e = p * np.exp(ex - top)
        den = e.sum()
        return (e @ n) ** 2 / den * math.exp(top) * norm

    return f


def spread_h0(init: H0InitialState, lam: float, t: float, tol: float = 1e-8) -> H0Spread:
    """Mean per-record spread of N under H = 0, with the ordering check."""
    if t <= 0 or lam <= 0:
        raise ValueError("need t > 0 and lam > 0")
    n = init.support.astype(float)
    p = init.probs
    m1 = float(p @ n)
    m2 = float(p @ (n * n))
    if init.support.size == 1:
        ratio = m1 * m1
    else:
        lo, hi = init.mixture(lam, t).domain()
        ratio = _quad(_ratio_integrand(init, lam, t), lo, hi, points=list(2.0 * lam * t * n))
    res = H0Spread(sigma2_bar=m2 - ratio, meanN2_bar=m2, ratio_term=ratio, meanN_bar=m1)
    if m2 < ratio - tol or ratio < m1 * m1 - tol:
        raise InequalityChainError(f"ordering fails: <N2>={m2}, ratio={ratio}, <N>^2={m1 * m1}")
    return res
