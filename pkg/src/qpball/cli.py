"""Command-line front-end: every subcommand builds a scenario config and runs it."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .scenario import (CARLESON_MODES, CONFIG_SCHEMA, EXIT_INVALID, FORMS, ConfigError, dump_json,
                       load_config, run_scenario, validate)


def _count(text: str) -> int:
    value = float(text)
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return int(value)


def _point(text: str):
    """'[1,0],[0,0]' or '[[1,0],[0,0]]' -> list of [re, im] pairs."""
    obj = json.loads(text if text.strip().startswith("[[") else f"[{text}]")
    return obj


def _floats(text: str):
    return [float(x) for x in text.split(",") if x.strip()]


def _json_or_path(text: str):
    return json.loads(text) if text.lstrip().startswith("{") else text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpball", description="Q_p / Carleson / Riemann-Stieltjes numerics on the unit ball of C^n")
    ap.add_argument("--version", action="version", version=f"qpball {__version__} (config schema {CONFIG_SCHEMA})")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory (default: print JSON to stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=_count)
    common.add_argument("--workers", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("qpnorm", parents=[common], help="Q_p seminorm of a function")
    s.add_argument("--function", required=True)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--form", choices=FORMS, default="radial")

    s = sub.add_parser("carleson", parents=[common], help="Carleson constants of a measure")
    s.add_argument("--measure", required=True, type=_json_or_path, help="JSON object or file")
    s.add_argument("--mode", choices=CARLESON_MODES, default="lcm")
    s.add_argument("--q", type=float, default=1.0)
    s.add_argument("--s", type=float, default=1.0, help="kernel exponent of the integral form")
    s.add_argument("--n", type=int)

    s = sub.add_parser("op", parents=[common], help="operator certificate or compactness probe")
    s.add_argument("--kind", choices=("tg", "lg", "mg"), required=True)
    s.add_argument("--symbol", required=True)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--q", type=float)
    s.add_argument("--mode", choices=("certify", "probe"), default="certify")
    s.add_argument("--xi", type=_point)
    s.add_argument("--deltas", type=_floats)
    s.add_argument("--suite", nargs="+")

    s = sub.add_parser("cover", parents=[common], help="cover a cap by smaller caps")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--delta", type=float, default=0.5)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--xi", type=_point)
    s.add_argument("--test-points", type=_count, default=10_000)

    s = sub.add_parser("identities", parents=[common], help="exact operator identities on random polynomials")
    s.add_argument("--pairs", type=_count, default=100)
    s.add_argument("--max-degree", type=int, default=6)
    s.add_argument("--dims", type=lambda t: [int(x) for x in t.split(",")], default=[2, 3])

    s = sub.add_parser("validate", help="check a scenario config without running it")
    s.add_argument("config", type=Path)

    s = sub.add_parser("run", help="run a scenario config")
    s.add_argument("config", type=Path)
    s.add_argument("--out", type=Path)
    return ap


def _config_from_args(args) -> dict:
    cfg: dict = {"seed": args.seed}
    if args.samples is not None:
        cfg["samples"] = args.samples
    if args.workers != 1:
        cfg["workers"] = args.workers
    if args.command == "qpnorm":
        cfg.update(scenario="qpnorm", function=args.function, p=args.p, form=args.form)
    elif args.command == "carleson":
        cfg.update(scenario="carleson", measure=args.measure, mode=args.mode, q=args.q, s=args.s)
        if args.n is not None:
            cfg["n"] = args.n
    elif args.command == "op":
        cfg.update(scenario=f"op-{args.mode}", kind=args.kind, symbol=args.symbol, p=args.p,
                   q=args.p if args.q is None else args.q)
        for key in ("xi", "deltas", "suite"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
    elif args.command == "cover":
        cfg.update(scenario="cover-demo", n=args.n, delta=args.delta, m=args.m, test_points=args.test_points)
        if args.xi is not None:
            cfg["xi"] = args.xi
    elif args.command == "identities":
        cfg.update(scenario="identity-suite", pairs=args.pairs, max_degree=args.max_degree, dims=args.dims)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("validate", "run"):
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            sys.stdout.write(dump_json(exc.to_json()))
            return EXIT_INVALID
        base = args.config.parent
        if args.command == "validate":
            problems = validate(cfg, base)
            sys.stdout.write(dump_json({"config": str(args.config), "violations": problems}))
            return EXIT_INVALID if problems else 0
        out = args.out or (base / cfg["out"] if "out" in cfg else None)
        return run_scenario(cfg, base, out)
    return run_scenario(_config_from_args(args), Path("."), args.out)


if __name__ == "__main__":
    sys.exit(main())
