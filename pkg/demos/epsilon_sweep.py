"""Where the detour cost is smallest.

In the variable ``x = 1/(2 sqrt(2) eps)`` the rescaled cost
``sqrt(3) C (1/eps - 1)`` is nearly periodic, with local minima spaced by about 2.31.  This demo locates
them numerically and compares them with the reference grid ``x0 + k dx``.

Run with ``python demos/epsilon_sweep.py``.
"""
from bipartite_control.simulation import DELTA_X, X0, fit_minima_constants, sweep_cost

curve = sweep_cost(0.01, 0.3, 120)
best = curve.transformed.argmin()
print(f"smallest rescaled cost on a 120-point grid: eps = {curve.epsilons[best]:.4f}, "
      f"x = {curve.xs[best]:.4f}, value {curve.transformed[best]:.4f}")

fit = fit_minima_constants()
print(f"reference grid: x0 = {X0}, dx = {DELTA_X}")
print(f"fitted grid:    x0 = {fit['x0_fit']:.4f}, dx = {fit['dx_fit']:.4f}")
for k, x in zip(fit["k"], fit["minima_x"]):
    print(f"  k = {k}: minimum at x = {x:.4f}, grid predicts {X0 + k * DELTA_X:.4f}")
