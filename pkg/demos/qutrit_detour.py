"""Steering two qutrits from a product state to maximal entanglement.

The coupling ``A (x) A`` with ``A = diag(1, 0, -1)`` cannot move the
product state ``|33>`` on its own: the singular values sit at a fixed point
of the reduced flow.  Leaving that point by a small detour of size ``eps``
and then following the time-optimal path costs ``C(eps)``, which this demo
evaluates for the three control modes.

Run with ``python demos/qutrit_detour.py``.
"""
import numpy as np

from bipartite_control.simulation import MODES, cost_C, epsilon_protocol, t_star

print(f"time-optimal duration from the pole T* = {t_star():.6f}")
print(f"target singular values = {np.round(np.full(3, 1 / np.sqrt(3)), 6)}\n")

eps = 0.12
print(f"detour size eps = {eps}, cost C(eps) = {cost_C(eps):.5f}")
for mode in MODES:
    res = epsilon_protocol(eps, mode)
    print(f"  {mode:>15}: final singular values {np.round(res.final_singular, 5)}"
          f"  (norm error {res.norm_error():.1e})")
