#!/usr/bin/env python3
"""Rigidity checks on every body of the zoo; prints a table of the key statistics."""
import argparse
import sys

from clt_lab.experiments.rigidity import BODY_ZOO, rigidity_suite


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", type=int, nargs="+", default=[8, 32])
    parser.add_argument("-m", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=9)
    parser.add_argument("--directions", type=int, default=10)
    args = parser.parse_args(argv)

    print(f"{'body':<22}{'n':>4}{'min g(0)':>10}{'max sup g':>11}{'max P(<0)':>11}  verdict")
    all_ok = True
    for name, spec in BODY_ZOO.items():
        for n in args.dims:
            res = rigidity_suite(spec, n, args.m, args.seed, args.directions)
            v = res["values"]
            bad = [k for k, ok in res["checks"].items() if not ok]
            all_ok &= res["passed"]
            print(f"{name:<22}{n:>4}{v['min_g0']:>10.4f}{v['max_sup_g']:>11.4f}{v['max_grunbaum']:>11.4f}  "
                  f"{'pass' if res['passed'] else 'FAIL ' + ', '.join(bad)}")
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
