"""Weighted ensemble statistics.

Per-time partial sums are kept per batch (trajectory index mod n_batches) in
a shifted log domain so raw-scheme importance weights spanning hundreds of
orders of magnitude stay representable. Accumulators merge with Neumaier
compensation; because batch membership depends only on the trajectory index,
the result does not depend on how trajectories were grouped into chunks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import ESS_MIN, KS_ALPHA, N_BATCHES, SIGMA_BAND, ks_coefficient

_SUM_KEYS = ("w", "w2", "wm", "wmsq", "wm2", "wsig")


class EffectiveSampleSizeWarning(UserWarning):
    pass


class InequalityChainError(AssertionError):
    """<N^2>-bar >= mean(<N>^2/<1>) >= (<N>-bar)^2 violated beyond tolerance."""


def _neumaier_add(total: np.ndarray, comp: np.ndarray, x: np.ndarray) -> None:
    t = total + x
    big = np.abs(total) >= np.abs(x)
    comp += np.where(big, (total - t) + x, (x - t) + total)
    total[...] = t


@dataclass
class MomentAccumulator:
    n_times: int
    n_batches: int = N_BATCHES
    log_shift: np.ndarray = None
    sums: dict = None
    comps: dict = None
    counts: np.ndarray = None

    def __post_init__(self):
        shape = (self.n_batches, self.n_times)
        if self.log_shift is None:
            self.log_shift = np.full(self.n_times, -np.inf)
        if self.sums is None:
            self.sums = {k: np.zeros(shape) for k in _SUM_KEYS}
        if self.comps is None:
            self.comps = {k: np.zeros(shape) for k in _SUM_KEYS}
        if self.counts is None:
            self.counts = np.zeros(self.n_batches, dtype=np.int64)

    @property
    def n_records(self) -> int:
        return int(self.counts.sum())

    def _shift_to(self, new_shift: np.ndarray) -> None:
        old = self.log_shift
        with np.errstate(invalid="ignore"):
            d = np.where(np.isfinite(old), old - new_shift, -np.inf)
        f1 = np.exp(d)
        f2 = np.exp(2.0 * d)
        for k in _SUM_KEYS:
            f = f2 if k == "w2" else f1
            self.sums[k] *= f
            self.comps[k] *= f
        self.log_shift = new_shift

    def add(self, indices, log_weight, meanN, meanN2, sigma2) -> None:
        """Add trajectories (rows) with global trajectory ``indices``."""
        indices = np.asarray(indices)
        log_weight = np.atleast_2d(np.asarray(log_weight, dtype=float))
        meanN = np.atleast_2d(meanN)
        meanN2 = np.atleast_2d(meanN2)
        sigma2 = np.atleast_2d(sigma2)
        new_shift = np.maximum(self.log_shift, log_weight.max(axis=0))
        self._shift_to(new_shift)
        w = np.exp(log_weight - new_shift)
        contrib = {
            "w": w,
            "w2": w * w,
            "wm": w * meanN,
            "wmsq": w * meanN * meanN,
            "wm2": w * meanN2,
            "wsig": w * sigma2,
        }
        batch = indices % self.n_batches
        for b in np.unique(batch):
            rows = batch == b
            self.counts[b] += int(rows.sum())
            for k in _SUM_KEYS:
                tot, cmp = self.sums[k][b], self.comps[k][b]
                _neumaier_add(tot, cmp, contrib[k][rows].sum(axis=0))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if (other.n_times, other.n_batches) != (self.n_times, self.n_batches):
            raise ValueError("incompatible accumulators")
        out = MomentAccumulator(self.n_times, self.n_batches)
        shift = np.maximum(self.log_shift, other.log_shift)
        for src in (self, other):
            tmp = MomentAccumulator(
                src.n_times,
                src.n_batches,
                src.log_shift.copy(),
                {k: v.copy() for k, v in src.sums.items()},
                {k: v.copy() for k, v in src.comps.items()},
                src.counts.copy(),
            )
            tmp._shift_to(shift)
            for k in _SUM_KEYS:
                _neumaier_add(out.sums[k], out.comps[k], tmp.sums[k])
                _neumaier_add(out.sums[k], out.comps[k], tmp.comps[k])
            out.counts += src.counts
        out.log_shift = shift
        return out

    def totals(self) -> dict:
        return {k: (self.sums[k] + self.comps[k]) for k in _SUM_KEYS}


@dataclass
class EnsembleStats:
    """Ensemble averages per recorded time; ``*_err`` are batch-means errors."""

    times: np.ndarray
    n_traj: int
    scheme: str
    meanN_bar: np.ndarray
    meanN_bar_err: np.ndarray
    meanN2_bar: np.ndarray
    meanN2_bar_err: np.ndarray
    ratio_term: np.ndarray
    ratio_term_err: np.ndarray
    sigma2_bar: np.ndarray
    sigma2_bar_err: np.ndarray
    ess: np.ndarray
    n_batches: int = N_BATCHES
    flags: list = field(default_factory=list)

    def at(self, t: float) -> int:
        """Index of the recorded time closest to ``t``."""
        return int(np.argmin(np.abs(self.times - t)))

    def as_dict(self) -> dict:
        return {
            "n_traj": self.n_traj,
            "scheme": self.scheme,
            "n_batches": self.n_batches,
            "t": self.times,
            "meanN_bar": self.meanN_bar,
            "stderr": self.meanN_bar_err,
            "meanN2_bar": self.meanN2_bar,
            "meanN2_bar_err": self.meanN2_bar_err,
            "ratio_term": self.ratio_term,
            "ratio_term_err": self.ratio_term_err,
            "sigma2_bar": self.sigma2_bar,
            "sigma2_bar_err": self.sigma2_bar_err,
            "ESS": self.ess,
            "flags": list(self.flags),
        }


def _batch_ratio_err(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """stderr of a self-normalized estimator from its per-batch values."""
    used = den > 0 if den.ndim == 1 else np.all(den > 0, axis=1)
    nb = int(used.sum())
    if nb < 2:
        return np.zeros(num.shape[1])
    q = num[used] / den[used]
    return q.std(axis=0, ddof=1) / math.sqrt(nb)


def finalize(acc: MomentAccumulator, times, scheme: str, check_chain: bool = True) -> EnsembleStats:
    tot = acc.totals()
    sw = tot["w"].sum(axis=0)
    sw2 = tot["w2"].sum(axis=0)
    mean = tot["wm"].sum(axis=0) / sw
    ratio = tot["wmsq"].sum(axis=0) / sw
    m2 = tot["wm2"].sum(axis=0) / sw
    sig = tot["wsig"].sum(axis=0) / sw
    ess = sw * sw / sw2
    den = tot["w"]
    stats = EnsembleStats(
        times=np.asarray(times, dtype=float),
        n_traj=acc.n_records,
        scheme=str(scheme),
        meanN_bar=mean,
        meanN_bar_err=_batch_ratio_err(tot["wm"], den),
        meanN2_bar=m2,
        meanN2_bar_err=_batch_ratio_err(tot["wm2"], den),
        ratio_term=ratio,
        ratio_term_err=_batch_ratio_err(tot["wmsq"], den),
        sigma2_bar=sig,
        sigma2_bar_err=_batch_ratio_err(tot["wsig"], den),
        ess=ess,
        n_batches=acc.n_batches,
    )
    if np.any(ess < ESS_MIN) and acc.n_records >= ESS_MIN:
        stats.flags.append("low_ess")
        warnings.warn(f"effective sample size down to {ess.min():.1f}", EffectiveSampleSizeWarning, stacklevel=2)
    if np.any(sig < -SIGMA_BAND * stats.sigma2_bar_err - 1e-12):
        stats.flags.append("negative_spread")
    if check_chain:
        check_inequality_chain(stats)
    return stats


def check_inequality_chain(stats: EnsembleStats, band: float = SIGMA_BAND) -> None:
    scale = 1e-10 * np.maximum(1.0, stats.meanN2_bar)
    tol_hi = band * np.hypot(stats.meanN2_bar_err, stats.ratio_term_err) + scale
    tol_lo = band * np.hypot(stats.ratio_term_err, 2 * stats.meanN_bar * stats.meanN_bar_err) + scale
    bad_hi = stats.meanN2_bar < stats.ratio_term - tol_hi
    bad_lo = stats.ratio_term < stats.meanN_bar ** 2 - tol_lo
    if np.any(bad_hi) or np.any(bad_lo):
        k = int(np.flatnonzero(bad_hi | bad_lo)[0])
        raise InequalityChainError(
            f"inequality chain fails at t={stats.times[k]}: <N2>={stats.meanN2_bar[k]}, "
            f"ratio={stats.ratio_term[k]}, <N>^2={stats.meanN_bar[k] ** 2}"
        )


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def weights_from_log(log_w) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    return np.exp(log_w - log_w.max())


def weighted_ecdf(x, w=None):
    """Sorted sample and right-continuous weighted ECDF values."""
    x = np.asarray(x, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    c = np.cumsum(ws)
    return xs, c / c[-1]


def ks_weighted_1samp(x, w, cdf) -> tuple[float, float]:
    """Weighted one-sample KS distance and the effective sample size."""
    w = np.ones(len(x)) if w is None else np.asarray(w, dtype=float)
    xs, F = weighted_ecdf(x, w)
    G = cdf(xs)
    F_left = np.concatenate([[0.0], F[:-1]])
    d = max(np.max(np.abs(F - G)), np.max(np.abs(F_left - G)))
    return float(d), effective_sample_size(w)


def ks_weighted_2samp(x1, x2, w1=None, w2=None) -> tuple[float, float]:
    """Weighted two-sample KS distance and the combined effective size n1 n2/(n1+n2)."""
    w1 = np.ones(len(x1)) if w1 is None else np.asarray(w1, dtype=float)
    w2 = np.ones(len(x2)) if w2 is None else np.asarray(w2, dtype=float)
    xs1, F1 = weighted_ecdf(x1, w1)
    xs2, F2 = weighted_ecdf(x2, w2)
    grid = np.concatenate([xs1, xs2])
    c1 = np.concatenate([[0.0], F1])[np.searchsorted(xs1, grid, side="right")]
    c2 = np.concatenate([[0.0], F2])[np.searchsorted(xs2, grid, side="right")]
    n1, n2 = effective_sample_size(w1), effective_sample_size(w2)
    return float(np.max(np.abs(c1 - c2))), n1 * n2 / (n1 + n2)


def ks_critical(n_eff: float, alpha: float = KS_ALPHA) -> float:
    return ks_coefficient(alpha) / math.sqrt(n_eff)


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)
