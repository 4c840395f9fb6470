"""Randomized coordinate descent on a random quadratic, checked against two bounds.

The sublinear bound depends on the sublevel-set radius R0, computed exactly
from the eigen-decomposition and cross-checked here by sampling.

    python demos/demo_rates.py [n] [cond]
"""

import sys

import numpy as np

from blockselect.convergence import (check_rate_bounds, estimate_R0, random_problem,
                                     rcd_minimize, sampled_sublevel_radius)

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10
cond = float(sys.argv[2]) if len(sys.argv) > 2 else 100.0

problem = random_problem(n, seed=0, cond=cond)
x0 = np.random.default_rng(1).standard_normal(n) * 2

r0 = estimate_R0(problem, x0)
print(f"n={n} cond={cond:g}  R0 exact {r0:.6f}  sampled "
      f"{sampled_sublevel_radius(problem, x0, seed=0):.6f}")

rep = check_rate_bounds(rcd_minimize(problem, x0, k_max=500, n_seeds=50), problem, x0)
print(f"violations: {len(rep.violations)}")
print("\n    k     mean gap       bound5       bound6")
for k in (1, 5, 10, 50, 100, 250, 500):
    i = k - 1
    print(f"{k:5d}  {rep.mean_gap[i]:11.4e}  {rep.bound5[i]:11.4e}  {rep.bound6[i]:11.4e}")
