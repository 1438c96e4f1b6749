"""Batched Monte Carlo trajectories of the collapse-driven growth model.

Each step applies the per-instant factor in operator order: the unitary
``exp(-i dt H)`` first, then the diagonal collapse factor
``exp(-dt (w - 2 lam N)^2 / 4 lam)``. States are renormalized every step; the
discarded magnitude is accumulated in ``log_norm2`` (log <1>_w).

Trajectories are rows of a 2-D array. Trajectory ``i`` of an ensemble draws
all of its randomness from its own Philox stream keyed by
``derive_seed(master_seed, stream, i)``, so results do not depend on chunking
or worker count.
"""
from __future__ import annotations

import concurrent.futures as cf
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from . import stats as _stats
from .constants import LEAKAGE_TOL, MAX_N_MAX, MIN_RECORDS, N_BATCHES
from .fock import (
    DegenerateStateError,
    FockVector,
    LeakageError,
    ModelParams,
    get_propagator,
)
from .noise import (
    PHYSICAL_METHODS,
    SPACE_STREAM,
    Scheme,
    derive_seed,
    make_rng,
)

THREADS_ENV = "CHRONO_THREADS"


class WorkerError(RuntimeError):
    """A chunk of trajectories failed; ``index`` is the first trajectory of the chunk."""

    def __init__(self, index: int, exc: BaseException):
        super().__init__(f"trajectories from index {index}: {exc!r}")
        self.index = index


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    log_norm2: np.ndarray
    meanN: np.ndarray
    meanN2: np.ndarray
    sigma2: np.ndarray
    leakage: float
    seed: int
    log_weight: np.ndarray = None
    brownian: np.ndarray = None
    n_max: int = 0
    scheme: str = Scheme.PHYSICAL.value
    noise: np.ndarray = None

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,log_norm2,meanN,meanN2,sigma2\n")
            for row in zip(self.times, self.log_norm2, self.meanN, self.meanN2, self.sigma2):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


@dataclass
class BatchResult:
    times: np.ndarray
    log_norm2: np.ndarray
    log_weight: np.ndarray
    meanN: np.ndarray
    meanN2: np.ndarray
    sigma2: np.ndarray
    brownian: np.ndarray
    leakage: np.ndarray
    seeds: np.ndarray
    n_max: np.ndarray
    noise: np.ndarray = None

    _ROW_FIELDS = ("log_norm2", "log_weight", "meanN", "meanN2", "sigma2", "brownian")

    @property
    def n_traj(self) -> int:
        return self.meanN.shape[0]

    def replace_rows(self, rows, other: "BatchResult") -> None:
        for name in self._ROW_FIELDS:
            getattr(self, name)[rows] = getattr(other, name)
        self.leakage[rows] = other.leakage
        self.n_max[rows] = other.n_max
        if self.noise is not None and other.noise is not None:
            self.noise[rows] = other.noise

    @classmethod
    def concatenate(cls, parts: list["BatchResult"]) -> "BatchResult":
        first = parts[0]
        kw = {name: np.concatenate([getattr(p, name) for p in parts]) for name in cls._ROW_FIELDS}
        noise = None
        if all(p.noise is not None for p in parts):
            noise = np.concatenate([p.noise for p in parts])
        return cls(
            times=first.times,
            leakage=np.concatenate([p.leakage for p in parts]),
            seeds=np.concatenate([p.seeds for p in parts]),
            n_max=np.concatenate([p.n_max for p in parts]),
            noise=noise,
            **kw,
        )


def _initial_amplitudes(init, n_max: int) -> np.ndarray:
    if init is None:
        a = np.zeros(n_max + 1, dtype=complex)
        a[0] = 1.0
        return a
    amps = init.normalized() if isinstance(init, FockVector) else np.asarray(init, dtype=complex)
    amps = amps / np.linalg.norm(amps)
    if amps.size > n_max + 1:
        if np.any(amps[n_max + 1:] != 0):
            raise ValueError("initial state has support above n_max")
        amps = amps[: n_max + 1]
    out = np.zeros(n_max + 1, dtype=complex)
    out[: amps.size] = amps
    return out


def evolve_batch(
    p: ModelParams,
    steps: int,
    dt: float,
    scheme: Scheme | str,
    seeds,
    init=None,
    stride: int = 1,
    method: str = "mixture",
    raw_drift: float = 0.0,
    noise: np.ndarray | None = None,
    innovations: np.ndarray | None = None,
    keep_noise: bool = False,
) -> BatchResult:
    """Evolve one row per seed for ``steps`` steps of size ``dt``.

    ``noise`` (rows x steps) replays given w values; ``innovations`` supplies
    the standard normals instead of drawing them (Gaussian physical and raw
    schemes only). Moments are recorded every ``stride`` steps.
    """
    scheme = Scheme(scheme)
    if steps < 1 or dt <= 0:
        raise ValueError("need steps >= 1 and dt > 0")
    if steps % stride:
        raise ValueError("stride must divide steps")
    if method not in PHYSICAL_METHODS:
        raise ValueError(f"method must be one of {PHYSICAL_METHODS}")
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    ntraj = seeds.size
    d = p.n_max + 1
    lam = p.lam
    n = np.arange(d, dtype=float)
    n2 = n * n
    collapse = lam > 0
    have_h = p.epsilon != 0 or p.g != 0
    U = get_propagator(p.epsilon, p.g, p.n_max).matrix(dt) if have_h else None

    use_mixture = collapse and scheme is Scheme.PHYSICAL and method == "mixture" and noise is None
    if collapse and noise is None:
        if innovations is not None:
            if use_mixture:
                raise ValueError("fixed innovations require method='gaussian' or the raw scheme")
            z = np.asarray(innovations, dtype=float).reshape(ntraj, steps)
            u = None
        else:
            z = np.empty((ntraj, steps))
            u = np.empty((ntraj, steps)) if use_mixture else None
            for i, s in enumerate(seeds):
                rng = make_rng(int(s))
                z[i] = rng.standard_normal(steps)
                if u is not None:
                    u[i] = rng.random(steps)
    elif noise is not None:
        noise = np.asarray(noise, dtype=float).reshape(ntraj, steps)

    psi = np.tile(_initial_amplitudes(init, p.n_max), (ntraj, 1))
    n_rec = steps // stride
    out = {k: np.empty((ntraj, n_rec)) for k in BatchResult._ROW_FIELDS}
    L = np.zeros(ntraj)
    LW = np.zeros(ntraj)
    B = np.zeros(ntraj)
    top = np.zeros(ntraj)
    kept = np.empty((ntraj, steps)) if keep_noise and collapse else None
    sd = math.sqrt(lam / dt) if collapse else 0.0
    c = -dt / (4.0 * lam) if collapse else 0.0
    rows = np.arange(ntraj)
    j = 0
    for k in range(steps):
        if have_h:
            psi = psi @ U
        pw = psi.real ** 2 + psi.imag ** 2
        if collapse:
            if noise is not None:
                w = noise[:, k]
            elif scheme is Scheme.RAW:
                w = 2.0 * lam * raw_drift + sd * z[:, k]
            elif use_mixture:
                cdf = np.cumsum(pw, axis=1)
                target = u[:, k] * cdf[:, -1]
                pick = np.minimum((cdf <= target[:, None]).sum(axis=1), d - 1)
                w = 2.0 * lam * pick + sd * z[:, k]
            else:
                m = (pw @ n) / pw.sum(axis=1)
                w = 2.0 * lam * m + sd * z[:, k]
            f = c * (w[:, None] - 2.0 * lam * n) ** 2
            fmax = f.max(axis=1)
            psi = psi * np.exp(f - fmax[:, None])
            pw = psi.real ** 2 + psi.imag ** 2
            s = pw.sum(axis=1)
            bad = ~(s > 0) | ~np.isfinite(s)
            if np.any(bad):
                raise DegenerateStateError(f"state norm vanished for seed {int(seeds[rows[bad][0]])} at step {k + 1}")
            L += np.log(s) + 2.0 * fmax
            LW += dt * (w - 2.0 * lam * raw_drift) ** 2 / (2.0 * lam)
            B += w * dt
            if kept is not None:
                kept[:, k] = w
        else:
            s = pw.sum(axis=1)
            L += np.log(s)
        psi /= np.sqrt(s)[:, None]
        pw /= s[:, None]
        if p.g != 0:
            # only the coupling g can carry population past n_max
            np.maximum(top, pw[:, -1], out=top)
        if (k + 1) % stride == 0:
            m = pw @ n
            out["meanN"][:, j] = m
            out["meanN2"][:, j] = pw @ n2
            out["sigma2"][:, j] = np.einsum("ij,ij->i", pw, (n[None, :] - m[:, None]) ** 2)
            out["log_norm2"][:, j] = L
            out["log_weight"][:, j] = L + LW
            out["brownian"][:, j] = B
            j += 1
    times = dt * stride * np.arange(1, n_rec + 1)
    return BatchResult(
        times=times,
        leakage=top,
        seeds=seeds.copy(),
        n_max=np.full(ntraj, p.n_max),
        noise=kept,
        **out,
    )


def suggest_n_max(p: ModelParams, t_final: float) -> int:
    """ceil(4 m + 10 sqrt(m)) with m the predicted ensemble mean at t_final."""
    from .analytic import CosmoAnalytic, mean_N_analytic

    if p.g == 0:
        return p.n_max
    m = mean_N_analytic(CosmoAnalytic(p.epsilon, p.g, p.lam), t_final)
    return max(16, int(math.ceil(4.0 * m + 10.0 * math.sqrt(m))))


def _fix_leakage(res: BatchResult, p: ModelParams, leak_tol: float, run_one) -> None:
    """Re-run leaking rows one at a time with doubled truncation."""
    for i in np.flatnonzero(res.leakage > leak_tol):
        n_max = int(res.n_max[i])
        while True:
            n_max *= 2
            if n_max > MAX_N_MAX:
                raise LeakageError(f"seed {int(res.seeds[i])}: leakage persists up to n_max={MAX_N_MAX}")
            redo = run_one(p.with_n_max(n_max), res.seeds[i : i + 1])
            if redo.leakage[0] <= leak_tol:
                res.replace_rows(slice(i, i + 1), redo)
                break


def simulate_trajectory(
    p: ModelParams,
    steps: int,
    dt: float,
    scheme: Scheme | str = Scheme.PHYSICAL,
    seed: int = 0,
    init=None,
    stride: int = 1,
    method: str = "mixture",
    raw_drift: float = 0.0,
    noise=None,
    leak_tol: float = LEAKAGE_TOL,
    grow: bool = True,
    keep_noise: bool = False,
) -> TrajectoryRecord:
    """Single trajectory from |0> (or ``init``); lam = 0 is plain Schroedinger evolution."""
    scheme = Scheme(scheme)
    noise_rows = None if noise is None else np.asarray(getattr(noise, "values", noise))[None, :]

    def run(pp, seeds):
        return evolve_batch(pp, steps, dt, scheme, seeds, init, stride, method, raw_drift,
                            noise=noise_rows, keep_noise=keep_noise)

    res = run(p, [seed])
    if res.leakage[0] > leak_tol:
        if not grow:
            raise LeakageError(f"truncation leakage {res.leakage[0]:.3e} > {leak_tol:g} at n_max={p.n_max}")
        _fix_leakage(res, p, leak_tol, run)
    return TrajectoryRecord(
        times=res.times,
        log_norm2=res.log_norm2[0],
        meanN=res.meanN[0],
        meanN2=res.meanN2[0],
        sigma2=res.sigma2[0],
        leakage=float(res.leakage[0]),
        seed=int(res.seeds[0]),
        log_weight=res.log_weight[0],
        brownian=res.brownian[0],
        n_max=int(res.n_max[0]),
        scheme=scheme.value,
        noise=None if res.noise is None else res.noise[0],
    )


@dataclass
class EnsembleRun:
    params: ModelParams
    steps: int
    dt: float
    scheme: Scheme
    master_seed: int
    stream: int
    result: BatchResult
    method: str = "mixture"
    raw_drift: float = 0.0
    chunk_size: int = 1024

    @property
    def times(self) -> np.ndarray:
        return self.result.times

    @property
    def n_traj(self) -> int:
        return self.result.n_traj

    def record(self, i: int) -> TrajectoryRecord:
        r = self.result
        return TrajectoryRecord(
            times=r.times, log_norm2=r.log_norm2[i], meanN=r.meanN[i], meanN2=r.meanN2[i],
            sigma2=r.sigma2[i], leakage=float(r.leakage[i]), seed=int(r.seeds[i]),
            log_weight=r.log_weight[i], brownian=r.brownian[i], n_max=int(r.n_max[i]),
            scheme=self.scheme.value,
        )

    def statistical_log_weights(self) -> np.ndarray:
        if self.scheme is Scheme.RAW:
            return self.result.log_weight
        return np.zeros_like(self.result.log_weight)

    def accumulator(self, n_batches: int = N_BATCHES, rows=None) -> _stats.MomentAccumulator:
        r = self.result
        rows = np.arange(r.n_traj) if rows is None else np.asarray(rows)
        acc = _stats.MomentAccumulator(r.times.size, n_batches)
        acc.add(rows, self.statistical_log_weights()[rows], r.meanN[rows], r.meanN2[rows], r.sigma2[rows])
        return acc

    def stats(self, n_batches: int = N_BATCHES, check_chain: bool = True) -> _stats.EnsembleStats:
        return _stats.finalize(self.accumulator(n_batches), self.times, self.scheme.value, check_chain)


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def simulate_ensemble(
    p: ModelParams,
    steps: int,
    dt: float,
    scheme: Scheme | str,
    master_seed: int,
    n_traj: int,
    stream: int = SPACE_STREAM,
    init=None,
    stride: int = 1,
    method: str = "mixture",
    raw_drift: float = 0.0,
    auto_n_max: bool = True,
    chunk_size: int = 1024,
    leak_tol: float = LEAKAGE_TOL,
    workers: int | None = None,
    first_index: int = 0,
    keep_noise: bool = False,
) -> EnsembleRun:
    """Independent trajectories ``first_index .. first_index + n_traj - 1``.

    With ``auto_n_max`` the truncation starts from the growth-law estimate and
    every trajectory whose edge population exceeded ``leak_tol`` is re-run
    alone with doubled ``n_max`` until it passes.
    """
    scheme = Scheme(scheme)
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if steps < 1 or dt <= 0 or stride < 1 or steps % stride:
        raise ValueError("need steps >= 1, dt > 0 and a stride dividing steps")
    if auto_n_max and init is None:
        p = p.with_n_max(suggest_n_max(p, steps * dt))
    idx = np.arange(first_index, first_index + n_traj)
    seeds = np.array([derive_seed(master_seed, stream, i) for i in idx], dtype=np.uint64)

    def run(pp, s):
        return evolve_batch(pp, steps, dt, scheme, s, init, stride, method, raw_drift, keep_noise=keep_noise)

    def run_chunk(a):
        try:
            return run(p, seeds[a : a + chunk_size])
        except (LeakageError, DegenerateStateError):
            raise
        except Exception as exc:
            raise WorkerError(first_index + a, exc) from exc

    # chunk boundaries depend only on the global index, never on worker count
    starts = list(range(0, n_traj, chunk_size))
    nw = worker_count(workers)
    if nw == 1 or len(starts) == 1:
        parts = [run_chunk(a) for a in starts]
    else:
        with cf.ThreadPoolExecutor(max_workers=nw) as ex:
            parts = list(ex.map(run_chunk, starts))
    res = BatchResult.concatenate(parts)
    if np.any(res.leakage > leak_tol):
        if not auto_n_max:
            raise LeakageError(f"{int(np.sum(res.leakage > leak_tol))} trajectories exceed leakage {leak_tol:g}")
        _fix_leakage(res, p, leak_tol, run)
    return EnsembleRun(p, steps, dt, scheme, int(master_seed), stream, res, method, raw_drift, chunk_size)


def ensemble_spread(
    records,
    scheme: Scheme | str | None = None,
    n_batches: int = N_BATCHES,
    check_chain: bool = True,
) -> _stats.EnsembleStats:
    """Weighted ensemble means, the ratio term and mean spread per recorded time.

    ``records`` is an :class:`EnsembleRun` or a sequence of
    :class:`TrajectoryRecord` on a common time grid. Raw records are weighted by
    their Radon-Nikodym factor ``exp(log_weight)``; physical ones uniformly.
    Raises :class:`~chronocollapse.stats.InequalityChainError` if the ordering
    <N^2>-bar >= ratio >= <N>-bar^2 fails beyond the statistical band.
    """
    if isinstance(records, EnsembleRun):
        if scheme is not None and Scheme(scheme) is not records.scheme:
            raise ValueError("scheme does not match the ensemble")
        return records.stats(n_batches, check_chain)
    records = list(records)
    if not records:
        raise ValueError("no records")
    scheme = Scheme(scheme if scheme is not None else records[0].scheme)
    times = records[0].times
    for r in records:
        if r.times.shape != times.shape or not np.allclose(r.times, times, rtol=0, atol=1e-12):
            raise ValueError("records have inconsistent time grids")
    if len(records) < MIN_RECORDS:
        warnings.warn(f"only {len(records)} records; batch-means errors are unreliable", stacklevel=2)
    meanN = np.array([r.meanN for r in records])
    if scheme is Scheme.RAW:
        logw = np.array([r.log_weight for r in records])
    else:
        logw = np.zeros_like(meanN)
    acc = _stats.MomentAccumulator(times.size, n_batches)
    acc.add(np.arange(len(records)), logw, meanN, np.array([r.meanN2 for r in records]),
            np.array([r.sigma2 for r in records]))
    return _stats.finalize(acc, times, scheme.value, check_chain)
