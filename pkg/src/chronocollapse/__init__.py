"""Collapse-driven growth of a single-mode universe and its clock.

Modules: ``fock`` (truncated Fock space), ``noise`` (noise records and
samplers), ``exact`` (instant product and H = 0 analytics), ``cosmo``
(trajectory ensembles), ``analytic`` (closed forms and oracles), ``clock``
(second sector) and ``harness`` / ``validation`` / ``cli``.
"""
from .analytic import CosmoAnalytic, CoherentOracle, ratio_term_oracle, delta_R_estimate, delta_T_estimate, fit_C
from .analytic import mean_N2_asymptotic, mean_N_analytic
from .clock import ClockParams, simulate_joint, simulate_joint_ensemble
from .cosmo import TrajectoryRecord, ensemble_spread, simulate_ensemble, simulate_trajectory
from .fock import FockVector, ModelParams
from .noise import NoisePath, Scheme
from .stats import EnsembleStats

__all__ = [
    "ClockParams", "CoherentOracle", "CosmoAnalytic", "EnsembleStats", "FockVector", "ModelParams", "NoisePath",
    "Scheme", "TrajectoryRecord", "delta_R_estimate", "delta_T_estimate", "ensemble_spread", "fit_C",
    "mean_N2_asymptotic", "mean_N_analytic", "ratio_term_oracle", "simulate_ensemble", "simulate_joint",
    "simulate_joint_ensemble", "simulate_trajectory",
]
__version__ = "0.1.0"
