"""Solve the all-ones model on a long horizon and watch the backward
solutions flatten onto their stationary values.

Run with:  python3 demos/steady_state.py
"""

import math

from lqmfg import CoefficientSet, TimeGrid, solve_limit

coeffs = CoefficientSet.from_constants(A=1, B=1, C=1, D=1, f=1, g=1, Q=1,
                                       R=1, Gamma=1, eta=1, H=1, Gamma0=1,
                                       eta0=1)
grid = TimeGrid(T=10.0, M=2000)
sol = solve_limit(coeffs, grid)

print("all-ones model, horizon T = 10")
print(f"  P(0)  = {sol.P[0]:.6f}   (stationary value 2+sqrt(5) = {2 + math.sqrt(5):.6f})")
print(f"  K(0)  = {sol.K[0]:.6f}")
print(f"  phi(0) = {sol.phi[0]:.6f}")
print(f"  terminal data: P(T) = {sol.P[-1]:g}, K(T) = {sol.K[-1]:g}, phi(T) = {sol.phi[-1]:g}")

# sample a few nodes to show the plateau away from the terminal layer
print("\n  t      P(t)      K(t)")
for t in (0.0, 2.5, 5.0, 7.5, 9.0, 9.9, 10.0):
    k = round(t / grid.dt)
    print(f"  {grid.nodes[k]:5.2f}  {sol.P[k]:8.5f}  {sol.K[k]:8.5f}")
