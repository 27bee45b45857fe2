"""Simulate decentralized populations of growing size and watch the
empirical average track the deterministic mean-field path.

Run with:  python3 demos/mean_field_tracking.py
"""

import numpy as np

from lqmfg import (CoefficientSet, InitialLaw, PopulationConfig, TimeGrid,
                   gains, make_law, simulate, solve_limit, solve_mean_field)

coeffs = CoefficientSet.from_constants(A=1, B=1, C=1, D=1, f=1, g=1, Q=1,
                                       R=1, Gamma=1, eta=1, H=1, Gamma0=1,
                                       eta0=1)
grid = TimeGrid(T=10.0, M=1000)
initial = InitialLaw.uniform(0.0, 20.0)

limit = solve_limit(coeffs, grid)
sched = gains(limit, coeffs)
xbar = solve_mean_field(coeffs, sched, initial.mean, grid)
law = make_law("decentralized", sched, xbar=xbar)

print("sup |empirical mean - mean-field path| over 10 replications")
print("    N     mean sup-gap")
for N in (8, 32, 128, 512):
    cfg = PopulationConfig(N=N, reps=10, master_seed=42, initial=initial)
    paths = simulate(coeffs, law, cfg, grid)
    gap = np.mean([np.max(np.abs(ps.mean - xbar.values)) for ps in paths])
    print(f"  {N:5d}   {gap:.4f}")
print("\nthe gap shrinks roughly like 1/sqrt(N)")
