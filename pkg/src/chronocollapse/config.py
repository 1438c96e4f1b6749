"""Experiment configuration: one TOML file, CLI flags override.

Example::

    experiment = "cosmo"
    seed = 7
    n_traj = 2000
    steps = 500
    dt = 0.05
    stride = 10

    [model]
    epsilon = 1.0
    g = 0.5
    lam = 2.0

    [clock]              # only read by the clock experiment
    epsilon_p = 2.0
    g_p = 0.5
    lambda_p = 1.0
"""
from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .clock import ClockParams
from .constants import DEFAULT_R
from .fock import ModelParams
from .noise import PHYSICAL_METHODS, Scheme

EXPERIMENTS = ("h0-collapse", "cosmo", "clock", "hopping", "analytic")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "cosmo"
    model: ModelParams = field(default_factory=lambda: ModelParams(epsilon=1.0, g=0.5, lam=2.0))
    clock: ClockParams | None = None
    scheme: str = "physical"
    method: str = "mixture"
    raw_drift: float = 0.0
    n_traj: int = 1000
    steps: int = 500
    dt: float = 0.05
    seed: int = 0
    stride: int = 10
    out: str = "out"
    # H = 0 experiments: initial populations on a finite support
    support: tuple = (0, 1)
    probs: tuple = (0.5, 0.5)
    R: float = DEFAULT_R
    # hopping: B(t1) near n1, B(t1 + t2) near n2
    t1: float = 25.0
    t2: float = 2500.0
    n1: int = 0
    n2: int = 1
    workers: int | None = None

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        try:
            Scheme(self.scheme)
        except ValueError:
            raise ConfigError(f"scheme must be raw or physical, got {self.scheme!r}") from None
        if self.method not in PHYSICAL_METHODS:
            raise ConfigError(f"method must be one of {PHYSICAL_METHODS}")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        if self.steps < 1 or self.dt <= 0:
            raise ConfigError("need steps >= 1 and dt > 0")
        if self.stride < 1 or self.steps % self.stride:
            raise ConfigError(f"stride {self.stride} must divide steps {self.steps}")
        if len(self.support) != len(self.probs):
            raise ConfigError("support and probs differ in length")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.experiment == "clock" and self.clock is None:
            raise ConfigError("clock experiment needs a [clock] table")
        out = Path(self.out)
        parent = out if out.exists() else out.parent
        if not os.access(parent if str(parent) else ".", os.W_OK):
            raise ConfigError(f"output directory {self.out!r} is not writable")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["support"] = list(self.support)
        d["probs"] = list(self.probs)
        return d


_MODEL_KEYS = {f.name for f in fields(ModelParams)}
_CLOCK_KEYS = {f.name for f in fields(ClockParams)}
_TOP_KEYS = {f.name for f in fields(ExperimentConfig)} - {"model", "clock"}


def from_mapping(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    data = dict(data)
    kw = {}
    model = data.pop("model", None)
    if model is not None:
        bad = set(model) - _MODEL_KEYS
        if bad:
            raise ConfigError(f"unknown [model] keys {sorted(bad)}")
        try:
            kw["model"] = replace(cfg.model, **model)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    clock = data.pop("clock", None)
    if clock is not None:
        bad = set(clock) - _CLOCK_KEYS
        if bad:
            raise ConfigError(f"unknown [clock] keys {sorted(bad)}")
        try:
            kw["clock"] = ClockParams(**clock)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    bad = set(data) - _TOP_KEYS
    if bad:
        raise ConfigError(f"unknown keys {sorted(bad)}")
    for k in ("support", "probs"):
        if k in data:
            data[k] = tuple(data[k])
    kw.update(data)
    return replace(cfg, **kw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return from_mapping(data)
