#!/usr/bin/env python3
"""gamma* = f''(0) over a (lambda, beta) grid, written as CSV.

    python scripts/sweep_gamma_star.py --lambdas 0.5 1 2 --betas 0.1:1.9:19 -o sweep.csv
"""
import argparse
import csv
import sys
import time

from mixedconv import Params, ShootError, solve
from mixedconv.cli import parse_grid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", nargs="+", type=float, default=[0.5, 1.0, 2.0])
    ap.add_argument("--betas", default="0.1:1.9:19", help="a:b:n or geom:a:b:n")
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("-o", "--out", default="-")
    args = ap.parse_args(argv)

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out)
    w.writerow(["lambda", "alpha", "beta", "gamma_star", "tail_gap", "iterations", "status",
                "seconds"])
    for lam in args.lambdas:
        for beta in parse_grid(args.betas):
            t0 = time.perf_counter()
            try:
                r, status = solve(Params(lam, args.alpha, beta)), "converged"
            except ShootError as e:
                r, status = e.result, e.status
            dt = time.perf_counter() - t0
            g = r.gamma_star if r else float("nan")
            gap = r.tail_gap if r else float("nan")
            w.writerow([lam, args.alpha, beta, repr(g), f"{gap:.3e}", r.iterations if r else 0,
                        status, f"{dt:.2f}"])
            out.flush()
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
