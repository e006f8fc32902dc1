#!/usr/bin/env python3
"""Classify a gamma grid across the bracket and print the A/B pattern.

The set of gammas giving type A and the set giving type B should each be an
interval, meeting at the solution gamma*.
"""
import argparse

import numpy as np

from mixedconv import Params, initial_bracket, solve
from mixedconv.shoot import classify_many


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args(argv)

    p = Params(args.lam, args.alpha, args.beta)
    br = initial_bracket(p)
    grid = np.linspace(br.gamma_a, br.gamma_b, args.n)
    tags = [c.tag.value for c in classify_many(p, grid, workers=args.workers)]
    gs = solve(p).gamma_star

    print(f"# lambda={p.lam} alpha={p.alpha} beta={p.beta} ({p.mode}); gamma*={gs!r}")
    print("".join({"TypeA": "A", "TypeB": "B", "TypeC": "C"}.get(t, "?") for t in tags))
    switches = [i for i in range(1, len(tags)) if tags[i] != tags[i - 1]]
    for i in switches:
        lo, hi = sorted((grid[i - 1], grid[i]))
        inside = lo <= gs <= hi
        print(f"switch {tags[i - 1]} -> {tags[i]} in [{lo:.10g}, {hi:.10g}]  gamma* inside: {inside}")
    print(f"{len(switches)} switch(es) on {args.n} points")


if __name__ == "__main__":
    main()
