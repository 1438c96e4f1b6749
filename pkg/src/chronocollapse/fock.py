"""Truncated single-mode Fock space.

States are stored unnormalized, with the overall magnitude factored into a
natural-log offset so that exponentially decaying norms never underflow.
The hamiltonian ``H = eps N + g (a + a^dag)`` is real-symmetric tridiagonal in
the number basis; its propagator is built once per (eps, g, n_max) from a
tridiagonal eigendecomposition and reused for every step.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .constants import LEAKAGE_TOL, RESCALE_HIGH, RESCALE_LOW


class DecompositionError(RuntimeError):
    """The tridiagonal eigensolver did not converge."""


class LeakageError(RuntimeError):
    """Probability reached the truncation edge beyond tolerance."""


class DegenerateStateError(RuntimeError):
    """The state norm vanished even after log-scale bookkeeping."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Model constants in Planck units (tau = 1).

    ``lam`` is the collapse rate (``lambda`` is reserved in Python).
    """

    epsilon: float = 0.0
    g: float = 0.0
    lam: float = 0.0
    tau: float = 1.0
    K: int = 1
    n_max: int = 16

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"collapse rate must be >= 0, got {self.lam}")
        if self.tau != 1.0:
            raise ValueError("tau is fixed to 1 (Planck time) internally")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if not (math.isfinite(self.epsilon) and math.isfinite(self.g)):
            raise ValueError("epsilon and g must be finite")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def with_n_max(self, n_max: int) -> "ModelParams":
        return replace(self, n_max=int(n_max))


@dataclass(frozen=True)
class FockVector:
    """Unnormalized amplitudes over n = 0..n_max times ``exp(log_scale)``.

    ``leaked`` accumulates squared magnitude (relative to the norm at the
    time of the drop) that creation pushed past ``n_max``.
    """

    amplitudes: np.ndarray
    log_scale: float = 0.0
    leaked: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise ValueError("amplitudes must be a 1-D array with n_max + 1 >= 2 entries")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, n: int, n_max: int) -> "FockVector":
        if not 0 <= n <= n_max:
            raise ValueError(f"basis index {n} outside 0..{n_max}")
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[n] = 1.0
        return cls(amps)

    @classmethod
    def vacuum(cls, n_max: int) -> "FockVector":
        return cls.basis(0, n_max)

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    def raw_norm2(self) -> float:
        a = self.amplitudes
        return float(np.sum(a.real ** 2 + a.imag ** 2))

    def log_norm2(self) -> float:
        s = self.raw_norm2()
        if s == 0.0:
            return -math.inf
        return math.log(s) + 2.0 * self.log_scale

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        p = a.real ** 2 + a.imag ** 2
        s = p.sum()
        if s == 0.0:
            raise DegenerateStateError("zero vector has no normalized populations")
        return p / s

    def normalized(self) -> np.ndarray:
        """Unit-norm amplitude array of the represented ray."""
        return self.amplitudes / math.sqrt(self.raw_norm2())

    def moments(self) -> tuple[float, float]:
        """Normalized <N> and <N^2>."""
        p = self.probabilities()
        n = np.arange(p.size)
        return float(p @ n), float(p @ (n * n))

    def variance_N(self) -> float:
        p = self.probabilities()
        n = np.arange(p.size)
        m = p @ n
        return float(p @ (n - m) ** 2)

    def truncation_leakage(self) -> float:
        return float(self.probabilities()[-1])

    def represented(self) -> np.ndarray:
        """amplitudes * exp(log_scale); may overflow for extreme scales."""
        return self.amplitudes * math.exp(self.log_scale)

    def rescaled(self, force: bool = False) -> "FockVector":
        """Move magnitude into ``log_scale`` by an exact power of two.

        Dividing by 2**e is exact in binary floating point, so the represented
        ray and all relative phases are untouched bit-for-bit.
        """
        top = float(np.max(np.abs(self.amplitudes)))
        if top == 0.0:
            raise DegenerateStateError("cannot rescale the zero vector")
        if not force and RESCALE_LOW <= top <= RESCALE_HIGH:
            return self
        _, e = math.frexp(top)
        amps = np.ldexp(self.amplitudes.real, -e) + 1j * np.ldexp(self.amplitudes.imag, -e)
        return replace(self, amplitudes=amps, log_scale=self.log_scale + e * math.log(2.0))

    def inner(self, other: "FockVector") -> complex:
        """<self|other> in represented units (log scales applied)."""
        return complex(np.vdot(self.amplitudes, other.amplitudes)) * math.exp(self.log_scale + other.log_scale)


def apply_annihilation(v: FockVector) -> FockVector:
    a = v.amplitudes
    n = np.arange(a.size)
    out = np.zeros_like(a)
    out[:-1] = np.sqrt(n[1:]) * a[1:]
    # nothing flows in from above n_max
    return replace(v, amplitudes=out)


def apply_creation(v: FockVector, leak_tol: float = LEAKAGE_TOL) -> FockVector:
    a = v.amplitudes
    total = v.raw_norm2()
    if total > 0 and abs(a[-1]) ** 2 / total > leak_tol:
        warnings.warn(
            f"creation applied with truncation leakage {abs(a[-1]) ** 2 / total:.3e}",
            TruncationWarning,
            stacklevel=2,
        )
    n = np.arange(a.size)
    out = np.zeros_like(a)
    out[1:] = np.sqrt(n[1:]) * a[:-1]
    dropped = (v.n_max + 1) * abs(a[-1]) ** 2
    leaked = v.leaked + (dropped / total if total > 0 else 0.0)
    return replace(v, amplitudes=out, leaked=leaked)


def number_apply(v: FockVector) -> FockVector:
    return replace(v, amplitudes=np.arange(v.amplitudes.size) * v.amplitudes)


def hamiltonian_apply(v: FockVector, p: ModelParams) -> FockVector:
    """(eps N + g(a + a^dag)) v, truncated; no leakage bookkeeping."""
    a = v.amplitudes
    n = np.arange(a.size)
    off = p.g * np.sqrt(n[1:])
    out = p.epsilon * n * a
    out[:-1] += off * a[1:]
    out[1:] += off * a[:-1]
    return replace(v, amplitudes=out)


def hamiltonian_matrix(epsilon: float, g: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    h = np.diag(epsilon * n.astype(float))
    off = g * np.sqrt(n[1:])
    h[np.arange(n_max), np.arange(1, n_max + 1)] = off
    h[np.arange(1, n_max + 1), np.arange(n_max)] = off
    return h


class Propagator:
    """exp(-i dt H) from a cached tridiagonal eigendecomposition."""

    def __init__(self, epsilon: float, g: float, n_max: int):
        n = np.arange(n_max + 1, dtype=float)
        try:
            energies, vectors = eigh_tridiagonal(epsilon * n, g * np.sqrt(n[1:]))
        except (LinAlgError, ValueError) as exc:
            raise DecompositionError(f"eigh_tridiagonal failed for eps={epsilon}, g={g}, n_max={n_max}") from exc
        if not np.all(np.isfinite(energies)):
            raise DecompositionError("non-finite eigenvalues")
        self.epsilon = epsilon
        self.g = g
        self.n_max = n_max
        self.energies = energies
        self.vectors = vectors
        self.energies.setflags(write=False)
        self.vectors.setflags(write=False)
        self._cache: dict[float, np.ndarray] = {}

    def matrix(self, dt: float) -> np.ndarray:
        """Complex-symmetric unitary U(dt); cached per dt."""
        u = self._cache.get(dt)
        if u is None:
            u = (self.vectors * np.exp(-1j * dt * self.energies)) @ self.vectors.T
            u.setflags(write=False)
            self._cache[dt] = u
        return u


@functools.lru_cache(maxsize=64)
def get_propagator(epsilon: float, g: float, n_max: int) -> Propagator:
    return Propagator(float(epsilon), float(g), int(n_max))


def unitary_step(v: FockVector, p: ModelParams, dt: float) -> FockVector:
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0 or (p.epsilon == 0 and p.g == 0):
        return v
    u = get_propagator(p.epsilon, p.g, v.n_max).matrix(dt)
    return replace(v, amplitudes=u @ v.amplitudes)


def collapse_log_factors(w, lam: float, dt: float, n_max: int) -> np.ndarray:
    """log of exp(-dt (w - 2 lam n)^2 / (4 lam)); broadcasts over w."""
    n = np.arange(n_max + 1)
    w = np.asarray(w, dtype=float)
    return -dt * (w[..., None] - 2.0 * lam * n) ** 2 / (4.0 * lam)


def collapse_step(v: FockVector, w: float, p: ModelParams, dt: float) -> FockVector:
    if p.lam <= 0:
        raise ValueError("collapse_step needs lam > 0")
    f = collapse_log_factors(w, p.lam, dt, v.n_max)
    top = float(f.max())
    amps = v.amplitudes * np.exp(f - top)
    return replace(v, amplitudes=amps, log_scale=v.log_scale + top).rescaled()
