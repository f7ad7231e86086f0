"""Command line entry point ``clt-lab``.

Exit codes: 0 when every assertion passes, 1 when some assertion fails (the
report is still written), 2 on a config or runtime error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from ..logconcave1d import NAMED_DENSITIES, GateError
from ..model import BODY_TYPES, DENSITY_TYPES
from .config import EXPERIMENTS, ConfigError, load_config
from .report import write_report
from .runners import ExperimentError, run_experiment

log = logging.getLogger("clt_lab")

EXIT_OK, EXIT_ASSERTION, EXIT_ERROR = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clt-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--seed", type=_u64, help="override the config seed")
        p.add_argument("--workers", type=_positive, help="worker threads (default: $CLT_LAB_WORKERS or 1)")
        p.add_argument("--out", help="output directory (default: config out_dir)")
    sub.add_parser("list-bodies", help="list body and density types")
    p = sub.add_parser("validate-config", help="check a config file without running it")
    p.add_argument("path")
    return parser


def _resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("CLT_LAB_WORKERS")
    if env:
        try:
            return _positive(env)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"CLT_LAB_WORKERS must be a positive integer, got {env!r}") from exc
    return 1


def _list_bodies() -> int:
    print("bodies:", ", ".join(BODY_TYPES))
    print("densities:", ", ".join(DENSITY_TYPES))
    print("product_1d labels:", ", ".join(sorted(NAMED_DENSITIES)))
    return EXIT_OK


def _validate(path: str) -> int:
    cfg = load_config(path)
    print(f"ok: {cfg.experiment} config, hash {cfg.hash()}")
    return EXIT_OK


def _run(args) -> int:
    overrides = {"seed": args.seed, "out_dir": args.out, "workers": _resolve_workers(args.workers)}
    cfg = load_config(args.config, **overrides)
    if cfg.experiment != args.command:
        raise ConfigError(f"config describes {cfg.experiment!r}, not {args.command!r}")
    log.info("running %s (hash %s, workers %d)", cfg.experiment, cfg.hash(), cfg.workers)
    report = run_experiment(cfg)
    root = write_report(report, cfg.out_dir)
    for a in report.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'}  {a.name}")
    print(f"report: {root / 'report.json'}")
    return EXIT_OK if report.passed else EXIT_ASSERTION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-bodies":
            return _list_bodies()
        if args.command == "validate-config":
            return _validate(args.path)
        return _run(args)
    except (ConfigError, ExperimentError, GateError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
