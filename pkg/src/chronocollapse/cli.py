"""Command line entry point.

Exit codes: 0 ok, 1 usage or config error, 2 validation failure (or ESS /
ordering warnings in a run), 3 numeric error (leakage, vanished norm,
eigensolver failure).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .harness import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, NUMERIC_ERRORS, dumps, run_experiment

log = logging.getLogger("chronocollapse")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML experiment file")
    p.add_argument("--seed", type=_u64, help="master seed (u64)")
    p.add_argument("--traj", type=int, help="number of trajectories")
    p.add_argument("--steps", type=int, help="number of time steps")
    p.add_argument("--dt", type=float, help="time step in Planck times")
    p.add_argument("--scheme", choices=["raw", "physical"])
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chronocollapse", description="collapse-driven growth model simulations")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "h0-collapse": "H = 0 collapse of a superposition; Born windows and B(t) density",
        "cosmo": "ensemble of growth trajectories",
        "clock": "joint space and clock ensembles",
        "hopping": "hop probability evaluators plus Monte Carlo frequency",
        "analytic": "growth-law and second-moment curves to CSV",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, help=h)
        _common(sp)
        sp.add_argument("--stride", type=int, help="record every N steps")
        sp.add_argument("--method", choices=["mixture", "gaussian"], help="physical-scheme sampler")
    vp = sub.add_parser("validate", help="run the acceptance checks")
    vp.add_argument("suite", nargs="?", default="all", choices=["h0", "cosmo", "clock", "all"])
    vp.add_argument("--out", type=Path, help="write the JSON report here")
    vp.add_argument("--quiet", action="store_true")
    return ap


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {"experiment": args.command}
    for flag, key in (("seed", "seed"), ("traj", "n_traj"), ("steps", "steps"), ("dt", "dt"),
                      ("scheme", "scheme"), ("stride", "stride"), ("method", "method")):
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    if args.out is not None:
        over["out"] = str(args.out)
    if args.config is None and args.command == "clock" and cfg.clock is None:
        from .clock import ClockParams

        over["clock"] = ClockParams(epsilon_p=2.0, g_p=0.5, lambda_p=1.0)
    return replace(cfg, **over).validate()


def _validate(args) -> int:
    from . import validation

    def show(r):
        if not args.quiet:
            print(r.line(), flush=True)

    rep = validation.validate(args.suite, progress=show)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(dumps(rep.to_dict()))
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    if args.command == "validate":
        return _validate(args)
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        res = run_experiment(cfg)
    except NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not args.quiet:
        for a in res.artifacts:
            print(a)
        keys = [k for k in ("flags", "closed_form", "quadrature", "mc_frequency", "growth_rate") if k in res.summary]
        if keys:
            print(json.dumps({k: res.summary[k] for k in keys}, default=str))
    return res.status


if __name__ == "__main__":
    sys.exit(main())
