"""Shared propagators for linear ODEs ``y' = G(t) y``.

Both the Schrödinger equation (``G = -iH``) and the reduced dynamics on the
Schmidt sphere (``G`` real antisymmetric) are of this form, so the same two
steppers serve both: an exact exponential for constant generators and a
fourth-order commutator Magnus step for time-dependent ones.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import expm

_GAUSS_OFFSET = np.sqrt(3.0) / 6.0


def exact_step(G: np.ndarray, h: float) -> np.ndarray:
    return expm(h * G)


def magnus4_step(G: Callable[[float], np.ndarray], t: float, h: float) -> np.ndarray:
    """Propagator over ``[t, t + h]`` from the two-point Gauss Magnus rule."""
    G1 = np.asarray(G(t + h * (0.5 - _GAUSS_OFFSET)))
    G2 = np.asarray(G(t + h * (0.5 + _GAUSS_OFFSET)))
    omega = 0.5 * h * (G1 + G2) + (np.sqrt(3.0) / 12.0) * h * h * (G2 @ G1 - G1 @ G2)
    return expm(omega)


def step_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Uniform grid from ``t0`` to ``t1`` with spacing at most ``dt``."""
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError(f"step size must be positive and finite, got {dt!r}")
    span = t1 - t0
    if span <= 0:
        return np.array([t0])
    n = max(1, int(np.ceil(span / dt - 1e-9)))
    return np.linspace(t0, t1, n + 1)


def propagate(y0, generator, t0: float, t1: float, dt: float, constant: bool):
    """Propagate ``y0`` over ``[t0, t1]`` and return ``(times, states)``.

    ``generator`` is a matrix when ``constant`` is true and a callable of
    time otherwise.
    """
    times = step_grid(t0, t1, dt)
    states = np.empty((times.size,) + np.shape(y0), dtype=np.result_type(y0, complex))
    y = np.asarray(y0)
    states[0] = y
    if constant:
        G = np.asarray(generator)
        cache: dict[float, np.ndarray] = {}
        for k in range(1, times.size):
            h = times[k] - times[k - 1]
            key = round(h, 15)
            if key not in cache:
                cache[key] = exact_step(G, h)
            y = cache[key] @ y
            states[k] = y
    else:
        for k in range(1, times.size):
            y = magnus4_step(generator, times[k - 1], times[k] - times[k - 1]) @ y
            states[k] = y
    return times, states
