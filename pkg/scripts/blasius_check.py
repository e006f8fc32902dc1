#!/usr/bin/env python3
"""lambda = 0 reduces the equation to f''' + f f'' = 0.

As the wall slope beta -> 0 the solution curvature should approach the
classical Blasius wall shear for this scaling, 0.469599988361...
"""
import numpy as np

from mixedconv import Params, solve

BLASIUS = 0.4695999883610  # f''' + f f'' = 0, f(0) = f'(0) = 0, f'(inf) = 1


def main():
    betas = np.array([0.1, 0.05, 0.02, 0.01, 0.005])
    gs = []
    print(f"{'beta':>8} {'gamma*':>20} {'tail gap':>10}")
    for b in betas:
        r = solve(Params(0.0, 0.0, float(b), allow_lambda_zero=True))
        gs.append(r.gamma_star)
        print(f"{b:8.3g} {r.gamma_star:20.15f} {r.tail_gap:10.2e}")
    # gamma*(beta) - gamma*(0) ~ beta^2: one Richardson step on the two smallest
    g0 = (4 * gs[-1] - gs[-2]) / 3
    print(f"extrapolated gamma*(0) = {g0:.10f}, reference {BLASIUS:.10f}, "
          f"difference {abs(g0 - BLASIUS):.1e}")


if __name__ == "__main__":
    main()
