#!/usr/bin/env python3
"""Run every shipped config through the CLI and print one status line each."""
import argparse
import sys
import time
from pathlib import Path

from clt_lab.experiments import load_config
from clt_lab.experiments.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--configs", default=str(ROOT / "configs"), help="directory of JSON configs")
    parser.add_argument("--out", default="results", help="report directory")
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args(argv)

    worst = 0
    for path in sorted(Path(args.configs).glob("*.json")):
        cfg = load_config(path)
        cmd = [cfg.experiment, "--config", str(path), "--out", args.out]
        if args.workers:
            cmd += ["--workers", str(args.workers)]
        start = time.perf_counter()
        code = cli_main(cmd)
        print(f"== {path.name}: exit {code} in {time.perf_counter() - start:.1f}s\n", flush=True)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
