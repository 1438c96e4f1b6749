"""Classical noise records w(t), their Brownian integrals, and samplers.

Two ways of drawing w:

* raw: i.i.d. Gaussian reference measure, variance lam/dt (optionally with a
  constant tilt 2*lam*drift), carried with a log importance weight;
* physical: drawn step by step from the norm-weighted conditional law, so
  every trajectory has unit statistical weight.

For one step of the discrete model the physical conditional law of w is
exactly the Gaussian mixture ``sum_n p_n N(2 lam n, lam/dt)`` where ``p_n`` are
the normalized populations entering the collapse factor. ``method="mixture"``
samples it exactly; ``method="gaussian"`` uses the single Gaussian with the
mixture's mean, which is its diffusion-limit approximation.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fock import DegenerateStateError, FockVector, ModelParams

SPACE_STREAM = 0
CLOCK_STREAM = 1
BRIDGE_STREAM = 2


class Scheme(str, enum.Enum):
    RAW = "raw"
    PHYSICAL = "physical"


PHYSICAL_METHODS = ("mixture", "gaussian")


def derive_seed(master_seed: int, stream: int, index: int) -> int:
    """64-bit seed for trajectory ``index`` of ``stream`` under ``master_seed``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class NoisePath:
    dt: float
    values: np.ndarray
    seed: int | None = None
    scheme: Scheme = Scheme.RAW

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.dt <= 0:
            raise ValueError("dt must be > 0")

    @property
    def steps(self) -> int:
        return self.values.size

    def brownian(self) -> np.ndarray:
        return brownian(self)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "w"])
            for k, w in enumerate(self.values, start=1):
                writer.writerow([k, f"{w:.17g}"])

    @classmethod
    def from_csv(cls, path, dt: float, seed: int | None = None, scheme: Scheme = Scheme.RAW) -> "NoisePath":
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["step", "w"]:
                raise ValueError(f"unexpected header {header!r}")
            rows = [(int(k), float(w)) for k, w in reader]
        steps = [k for k, _ in rows]
        if steps != list(range(1, len(rows) + 1)):
            raise ValueError("steps must run 1..n with no gaps")
        return cls(dt, np.array([w for _, w in rows]), seed, scheme)


@dataclass(frozen=True)
class PathWeight:
    """log of the path's importance weight.

    For raw paths ``exp(log_weight)`` is the Radon-Nikodym factor of the
    physical measure with respect to the Gaussian reference. Physical paths
    carry it for diagnostics only; their statistical weight is 1.
    """

    log_weight: float
    scheme: Scheme = Scheme.RAW

    @property
    def statistical_weight(self) -> float:
        return math.exp(self.log_weight) if Scheme(self.scheme) is Scheme.RAW else 1.0


def raw_log_density_correction(w, lam: float, dt: float, drift: float = 0.0):
    """Per-step term that turns log <1>_w into the log Radon-Nikodym weight.

    The physical density of w (w.r.t. prod dw / sqrt(2 pi lam/dt)) is <1>_w; the
    raw reference density w.r.t. the same is prod exp(-dt (w - 2 lam drift)^2 / 2 lam).
    """
    w = np.asarray(w, dtype=float)
    return dt * (w - 2.0 * lam * drift) ** 2 / (2.0 * lam)


def sample_raw(steps: int, dt: float, lam: float, seed: int, drift: float = 0.0) -> NoisePath:
    if steps < 1 or dt <= 0 or lam <= 0:
        raise ValueError("need steps >= 1, dt > 0, lam > 0")
    z = make_rng(seed).standard_normal(steps)
    return NoisePath(dt, 2.0 * lam * drift + math.sqrt(lam / dt) * z, seed, Scheme.RAW)


def sample_physical_step(
    current_state: FockVector,
    p: ModelParams,
    dt: float,
    rng: np.random.Generator,
    method: str = "mixture",
) -> float:
    """One w from the norm-weighted conditional law given ``current_state``.

    ``current_state`` is the state the collapse factor is about to act on
    (i.e. after the unitary part of the step). Draw order: one normal, then
    (mixture only) one uniform.
    """
    if current_state.raw_norm2() == 0.0 or not math.isfinite(current_state.log_norm2()):
        raise DegenerateStateError("state norm underflowed")
    probs = current_state.probabilities()
    z = rng.standard_normal()
    sd = math.sqrt(p.lam / dt)
    if method == "gaussian":
        return 2.0 * p.lam * float(probs @ np.arange(probs.size)) + sd * z
    if method != "mixture":
        raise ValueError(f"unknown method {method!r}")
    u = rng.random()
    n = min(int(np.searchsorted(np.cumsum(probs), u, side="right")), probs.size - 1)
    return 2.0 * p.lam * n + sd * z


def brownian(path: NoisePath) -> np.ndarray:
    """B(k dt) = dt * sum_{j<=k} w_j, accumulated left to right."""
    return path.dt * np.cumsum(path.values)


def refine_innovations(xi: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Halve the step of standard-normal innovations by Brownian-bridge midpoints.

    ``xi[..., k] * sqrt(dt)`` are increments of a Wiener path; the result holds
    increments on the grid dt/2 (scaled by 1/sqrt(dt/2)) of the *same* path.
    """
    xi = np.asarray(xi, dtype=float)
    dW = xi * math.sqrt(dt)
    first = 0.5 * dW + math.sqrt(dt / 4.0) * rng.standard_normal(dW.shape)
    out = np.empty(xi.shape[:-1] + (2 * xi.shape[-1],))
    out[..., 0::2] = first
    out[..., 1::2] = dW - first
    return out / math.sqrt(dt / 2.0)
