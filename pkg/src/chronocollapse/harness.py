"""Experiment orchestration and on-disk artifacts.

Every run writes ``summary.json`` (validated against the shipped schema) plus
experiment-specific CSV files into ``cfg.out``. Output is a pure function of
the config: there are no timestamps or host details in any artifact.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytic
from .clock import factorization_covariance, simulate_joint_ensemble, size_age_correlation
from .config import ExperimentConfig
from .cosmo import ensemble_spread, simulate_ensemble, simulate_trajectory, suggest_n_max
from .exact import (
    H0InitialState,
    build_instants,
    classify_B,
    hop_event_windows,
    hop_probability,
    pdf_B,
    spread_h0,
    write_instants_csv,
    write_pdf_csv,
)
from .fock import DecompositionError, DegenerateStateError, LeakageError, ModelParams
from .noise import SPACE_STREAM, NoisePath, Scheme, derive_seed
from .stats import EffectiveSampleSizeWarning, InequalityChainError, check_inequality_chain

log = logging.getLogger("chronocollapse")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (LeakageError, DegenerateStateError, DecompositionError, FloatingPointError,
                  analytic.FormulaError)


@dataclass
class ExperimentResult:
    summary: dict
    artifacts: list = field(default_factory=list)
    status: int = EXIT_OK
    stats: object = None


def _to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): _to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_to_jsonable(v) for v in x.tolist()]
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if hasattr(x, "__dataclass_fields__"):
        return _to_jsonable(vars(x))
    return x


def dumps(obj, indent: int = 1) -> str:
    """JSON text with every float written as %.17g (non-finite floats become null)."""

    def enc(x, depth):
        pad = " " * (indent * (depth + 1))
        end = " " * (indent * depth)
        if isinstance(x, bool) or x is None:
            return json.dumps(x)
        if isinstance(x, int):
            return str(x)
        if isinstance(x, float):
            return f"{x:.17g}" if math.isfinite(x) else "null"
        if isinstance(x, str):
            return json.dumps(x)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, depth + 1)}" for k, v in x.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(x, list):
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
                return "[" + ", ".join(enc(v, depth + 1) for v in x) + "]"
            if not x:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, depth + 1) for v in x) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(x)}")

    return enc(_to_jsonable(obj), 0) + "\n"


def load_schema() -> dict:
    text = resources.files("chronocollapse").joinpath("schemas/ensemble_summary.v1.json").read_text()
    return json.loads(text)


def validate_summary(summary: dict) -> None:
    import jsonschema

    jsonschema.validate(json.loads(dumps(summary)), load_schema())


def _write_json(path: Path, summary: dict) -> None:
    validate_summary(summary)
    path.write_text(dumps(summary))


def _block(stats, run=None) -> dict:
    d = stats.as_dict()
    if run is not None:
        d["max_leakage"] = float(np.max(run.result.leakage))
        d["n_max"] = int(np.max(run.result.n_max))
    return d


def _params_dict(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out", None)
    d.pop("workers", None)
    return d


def _stats_status(stats) -> int:
    return EXIT_VALIDATION if ("low_ess" in stats.flags or "inequality_chain" in stats.flags) else EXIT_OK


def _spread(run):
    """Ensemble statistics with the ordering check recorded as a flag."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EffectiveSampleSizeWarning)
        stats = ensemble_spread(run, check_chain=False)
    for w in caught:
        log.warning("%s", w.message)
    try:
        check_inequality_chain(stats)
    except InequalityChainError as exc:
        stats.flags.append("inequality_chain")
        log.warning("%s", exc)
    return stats


def _ensemble(cfg: ExperimentConfig, p: ModelParams, init=None, stream=SPACE_STREAM, keep_noise=False):
    return simulate_ensemble(p, cfg.steps, cfg.dt, cfg.scheme, cfg.seed, cfg.n_traj, stream=stream,
                             init=init, stride=cfg.stride, method=cfg.method, raw_drift=cfg.raw_drift,
                             workers=cfg.workers, keep_noise=keep_noise)


def _run_cosmo(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    run = _ensemble(cfg, cfg.model)
    stats = _spread(run)
    summary = {"schema_version": SCHEMA_VERSION, "experiment": "cosmo", "params": _params_dict(cfg)}
    summary.update(_block(stats, run))
    a = analytic.CosmoAnalytic.from_params(cfg.model)
    summary["analytic_meanN"] = analytic.mean_N_analytic(a, stats.times)
    _write_json(out / "summary.json", summary)
    traj = out / "trajectory_0.csv"
    run.record(0).to_csv(traj)
    return ExperimentResult(summary, [out / "summary.json", traj], _stats_status(stats), stats)


def _h0_init(cfg: ExperimentConfig) -> H0InitialState:
    return H0InitialState.from_probabilities(cfg.support, cfg.probs)


def _run_h0(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    init = _h0_init(cfg)
    if cfg.model.lam <= 0:
        raise ValueError("h0-collapse needs lam > 0")
    p = ModelParams(lam=cfg.model.lam, n_max=max(int(init.support.max()), 1))
    fock0 = init.to_fock(p.n_max)
    run = _ensemble(cfg, p, init=fock0)
    stats = _spread(run)
    t = float(stats.times[-1])
    B = run.result.brownian[:, -1]
    w = np.exp(run.statistical_log_weights()[:, -1] - run.statistical_log_weights()[:, -1].max())
    lab = classify_B(B, init, p.lam, t, cfg.R)
    wsum = w.sum()
    born = {str(n): float(w[lab == n].sum() / wsum) for n in init.support.tolist()}
    exact = spread_h0(init, p.lam, t)
    summary = {"schema_version": SCHEMA_VERSION, "experiment": "h0-collapse", "params": _params_dict(cfg)}
    summary.update(_block(stats, run))
    summary["born_frequencies"] = born
    summary["unclassified"] = float(w[lab < 0].sum() / wsum)
    summary["born_expected"] = {str(n): float(q) for n, q in zip(init.support.tolist(), init.probs)}
    summary["exact_spread"] = vars(exact)
    arts = [out / "summary.json"]
    mix = init.mixture(p.lam, t)
    grid = np.linspace(*mix.domain(6.0), 801)
    write_pdf_csv(out / "pdf_B.csv", grid, pdf_B(init, p.lam, t, grid))
    arts.append(out / "pdf_B.csv")
    if cfg.dt == 1.0:
        # the first ensemble member again, keeping its noise, laid out as instants
        rec = simulate_trajectory(p, cfg.steps, 1.0, cfg.scheme, derive_seed(cfg.seed, SPACE_STREAM, 0),
                                  init=fock0, method=cfg.method, raw_drift=cfg.raw_drift, keep_noise=True)
        K = cfg.steps + 1
        inst = build_instants(replace(p, K=K), NoisePath(1.0, rec.noise), fock0)
        write_instants_csv(out / "instants.csv", inst, K)
        arts.append(out / "instants.csv")
    _write_json(out / "summary.json", summary)
    return ExperimentResult(summary, arts, _stats_status(stats), stats)


def _run_clock(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    joint = simulate_joint_ensemble(cfg.model, cfg.clock, cfg.steps, cfg.dt, cfg.seed, cfg.n_traj,
                                    cfg.scheme, cfg.stride, cfg.method, cfg.workers)
    s_stats = _spread(joint.space)
    c_stats = _spread(joint.clock)
    summary = {"schema_version": SCHEMA_VERSION, "experiment": "clock", "params": _params_dict(cfg),
               "space": _block(s_stats, joint.space), "clock": _block(c_stats, joint.clock)}
    arts = [out / "summary.json"]
    status = max(_stats_status(s_stats), _stats_status(c_stats))
    if Scheme(cfg.scheme) is Scheme.PHYSICAL:
        cov = factorization_covariance(joint)
        summary["factorization"] = {"cov": cov.cov, "stderr": cov.stderr}
        try:
            rep = size_age_correlation(joint, cfg.model.lam, cfg.clock.lambda_p)
        except ValueError as exc:
            summary["correlation"] = {"skipped": str(exc)}
        else:
            rep.to_csv(out / "correlation.csv")
            arts.append(out / "correlation.csv")
            summary["correlation"] = {"slope": rep.slope, "slope_err": rep.slope_err,
                                      "intercept": rep.intercept, "intercept_err": rep.intercept_err}
    _write_json(out / "summary.json", summary)
    return ExperimentResult(summary, arts, status, (s_stats, c_stats))


def _run_hopping(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    init = _h0_init(cfg)
    lam = cfg.model.lam
    hp = hop_probability(init, lam, cfg.t1, cfg.t2, cfg.n1, cfg.n2, cfg.R)
    summary = {"schema_version": SCHEMA_VERSION, "experiment": "hopping", "params": _params_dict(cfg),
               "closed_form": hp.closed_form, "window_integrals": hp.window_integrals,
               "quadrature": hp.quadrature, "flags": hp.flags}
    k1 = int(round(cfg.t1 / cfg.dt))
    k = int(round((cfg.t1 + cfg.t2) / cfg.dt))
    if abs(k1 * cfg.dt - cfg.t1) > 1e-9 or abs(k * cfg.dt - cfg.t1 - cfg.t2) > 1e-9:
        raise ValueError("dt must divide t1 and t2")
    stride = math.gcd(k1, k)
    p = ModelParams(lam=lam, n_max=max(int(init.support.max()), 1))
    run = simulate_ensemble(p, k, cfg.dt, cfg.scheme, cfg.seed, cfg.n_traj, init=init.to_fock(p.n_max),
                            stride=stride, method=cfg.method, raw_drift=cfg.raw_drift, workers=cfg.workers)
    hops, n_eff = hop_frequency(run, lam, cfg.t1, cfg.t2, cfg.n1, cfg.n2, cfg.R)
    summary.update({"n_traj": cfg.n_traj, "mc_frequency": hops,
                    "mc_stderr": math.sqrt(max(hops * (1 - hops), 0.0) / n_eff) if n_eff else 0.0})
    _write_json(out / "summary.json", summary)
    return ExperimentResult(summary, [out / "summary.json"], EXIT_OK, hp)


def hop_frequency(run, lam, t1, t2, n1, n2, R) -> tuple[float, float]:
    """Weighted fraction of paths in the n1 window at t1 and the n2 window at t1 + t2."""
    times = run.times
    i1 = int(np.argmin(np.abs(times - t1)))
    i2 = int(np.argmin(np.abs(times - (t1 + t2))))
    (a1, b1), (a2, b2) = hop_event_windows(lam, t1, t2, n1, n2, R)
    B1 = run.result.brownian[:, i1]
    B2 = run.result.brownian[:, i2]
    lw = run.statistical_log_weights()[:, i2]
    w = np.exp(lw - lw.max())
    hit = (B1 >= a1) & (B1 <= b1) & (B2 >= a2) & (B2 <= b2)
    return float(w[hit].sum() / w.sum()), float(w.sum() ** 2 / np.sum(w * w))


def _run_analytic(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    p = cfg.model
    a = analytic.CosmoAnalytic.from_params(p)
    t_end = cfg.steps * cfg.dt
    pp = p.with_n_max(max(p.n_max, suggest_n_max(p, t_end)))
    t, m, m2, top = analytic.averaged_moments(pp, cfg.dt, cfg.steps, cfg.stride)
    mN = analytic.mean_N_analytic(a, t)
    m2a = analytic.mean_N2_asymptotic(a, t)
    ratio = analytic.ratio_term_oracle(a, t, m2 - m * m)
    path = out / "analytic.csv"
    with open(path, "w") as fh:
        fh.write("t,meanN_analytic,meanN2_asymptotic,meanN2_channel,ratio_oracle\n")
        for row in zip(t, mN, m2a, m2, ratio):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    summary = {"schema_version": SCHEMA_VERSION, "experiment": "analytic", "params": _params_dict(cfg),
               "growth_rate": a.growth_rate, "phi": a.phi, "channel_max_edge_population": top}
    _write_json(out / "summary.json", summary)
    return ExperimentResult(summary, [out / "summary.json", path], EXIT_OK, None)


_RUNNERS = {
    "cosmo": _run_cosmo,
    "h0-collapse": _run_h0,
    "clock": _run_clock,
    "hopping": _run_hopping,
    "analytic": _run_analytic,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.experiment](cfg, out)
