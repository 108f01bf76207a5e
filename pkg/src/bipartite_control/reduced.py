r"""Reduced control system on the Schmidt sphere.

The singular values of a bipartite state form a unit vector ``sigma``.  A
coupling Hamiltonian viewed through a local frame ``U = V (x) W`` induces a
real antisymmetric generator ``H_U`` and the reduced equation of motion is
``sigma' = -H_U sigma``.

Two conventions are fixed here and used everywhere else:

* ``so(3)``: ``-H_U = [omega]_x`` with
  ``[w]_x = [[0, -w_z, w_y], [w_z, 0, -w_x], [-w_y, w_x, 0]]``, so that
  ``-H_U sigma = omega x sigma``.
* ``so(2)``: the scalar ``omega(H_U) = (H_U)_{21}``.  A bare scalar rate ``w``
  supplied to a schedule means the counter-clockwise rotation
  ``sigma' = w J sigma`` with ``J = [[0, -1], [1, 0]]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ._integrators import propagate
from .core import (
    BipartiteState,
    CouplingHamiltonian,
    LocalUnitary,
    schmidt_decompose,
)

__all__ = [
    "DEFAULT_CHAMBER",
    "InducedField",
    "ControlSchedule",
    "ReducedTrajectory",
    "induced_field",
    "induced_generators",
    "hat",
    "vee",
    "weyl_project",
    "in_chamber",
    "schmidt_angle",
    "integrate_reduced",
    "singular_values",
    "singular_value_velocity",
]

# axis labels (x, y, z) map to indices (0, 1, 2); the string lists the chamber
# order from largest to smallest component
DEFAULT_CHAMBER = "zxy"
_AXES = {"x": 0, "y": 1, "z": 2}


def hat(omega) -> np.ndarray:
    """Cross-product matrix ``[omega]_x``."""
    wx, wy, wz = np.asarray(omega, dtype=float)
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def vee(K) -> np.ndarray:
    """Inverse of :func:`hat` on antisymmetric 3x3 matrices."""
    K = np.asarray(K, dtype=float)
    return np.array([K[2, 1], K[0, 2], K[1, 0]])


@dataclass(frozen=True)
class InducedField:
    """Antisymmetric generator ``H_U`` of the reduced dynamics."""

    generator: np.ndarray

    def __post_init__(self):
        H = np.array(self.generator, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("generator must be square")
        if not np.all(np.isfinite(H)):
            raise ValueError("generator has non-finite entries")
        if np.max(np.abs(H + H.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H), initial=0.0)):
            raise ValueError("generator is not antisymmetric")
        H = 0.5 * (H - H.T)
        H.setflags(write=False)
        object.__setattr__(self, "generator", H)

    @classmethod
    def from_omega(cls, omega) -> "InducedField":
        """Field whose :attr:`omega` equals ``omega`` (3-vector or scalar)."""
        omega = np.asarray(omega, dtype=float)
        if omega.ndim == 0:
            w = float(omega)
            return cls(np.array([[0.0, -w], [w, 0.0]]))
        return cls(-hat(omega))

    @classmethod
    def from_angular_velocity(cls, rate) -> "InducedField":
        """Field whose motion ``-H_U sigma`` has the given rate.

        Identical to :meth:`from_omega` for 3-vectors; a scalar is read as a
        counter-clockwise rate.
        """
        rate = np.asarray(rate, dtype=float)
        if rate.ndim == 0:
            return cls.from_omega(-float(rate))
        return cls.from_omega(rate)

    @property
    def dmin(self) -> int:
        return self.generator.shape[0]

    @property
    def omega(self):
        """``omega`` with ``-H_U = [omega]_x`` (dmin 3) or ``(H_U)_{21}`` (dmin 2)."""
        if self.dmin == 3:
            return vee(-self.generator)
        if self.dmin == 2:
            return float(self.generator[1, 0])
        raise ValueError(f"no angular-velocity form for dmin = {self.dmin}")

    @property
    def angular_velocity(self):
        """Rotation rate of ``sigma' = -H_U sigma``.

        For dmin 3 this is :attr:`omega`.  For dmin 2 it is the signed
        counter-clockwise rate, which is ``-omega``.
        """
        if self.dmin == 2:
            return -float(self.generator[1, 0])
        return self.omega

    def velocity(self, sigma) -> np.ndarray:
        return -self.generator @ np.asarray(sigma, dtype=float)


def _as_coupling(H0) -> CouplingHamiltonian:
    if isinstance(H0, CouplingHamiltonian):
        return H0
    raise TypeError("expected a CouplingHamiltonian")


def induced_generators(H0: CouplingHamiltonian, Vs, Ws) -> np.ndarray:
    """Batched ``H_U`` for stacks of local unitaries ``Vs[n]``, ``Ws[n]``."""
    H0 = _as_coupling(H0)
    Vs = np.asarray(Vs, dtype=complex)
    Ws = np.asarray(Ws, dtype=complex)
    d1, d2 = H0.dims
    if Vs.shape[-2:] != (d1, d1) or Ws.shape[-2:] != (d2, d2):
        raise ValueError("local unitaries do not match the Hamiltonian dimensions")
    m = min(d1, d2)
    Vh = np.conj(np.swapaxes(Vs, -1, -2))
    Wh = np.conj(np.swapaxes(Ws, -1, -2))
    out = np.zeros(np.broadcast_shapes(Vs.shape[:-2], Ws.shape[:-2]) + (m, m))
    for A, B in H0.terms:
        At = (Vh @ A @ Vs)[..., :m, :m]
        Bt = (Wh @ B @ Ws)[..., :m, :m]
        out += np.imag(At * Bt)
    return out


def induced_field(H0: CouplingHamiltonian, U: LocalUnitary | None = None) -> InducedField:
    """Induced field ``H_U = sum_k Im((V^* A_k V) o (W^* B_k W))``.

    The Hadamard product is truncated to the leading ``dmin x dmin`` block
    when the local dimensions differ.
    """
    H0 = _as_coupling(H0)
    if U is None:
        U = LocalUnitary.identity(H0.dims)
    if U.dims != H0.dims:
        raise ValueError(f"local unitary dims {U.dims} do not match {H0.dims}")
    return InducedField(induced_generators(H0, U.V, U.W))


def _chamber_perm(order, n: int) -> list[int]:
    if n != 3:
        return list(range(n))
    if isinstance(order, str):
        if sorted(order) != ["x", "y", "z"]:
            raise ValueError(f"chamber order must be a permutation of 'xyz', got {order!r}")
        return [_AXES[c] for c in order]
    perm = [int(i) for i in order]
    if sorted(perm) != [0, 1, 2]:
        raise ValueError(f"chamber order must be a permutation of (0, 1, 2), got {order!r}")
    return perm


def weyl_project(sigma, order=DEFAULT_CHAMBER) -> np.ndarray:
    """Representative of ``sigma`` in the Weyl chamber.

    Absolute values are sorted non-increasingly.  For three components the
    sorted values are placed on the axes listed in ``order`` (default
    ``sigma_z >= sigma_x >= sigma_y >= 0``); for other sizes the result is
    simply non-increasing.
    """
    sigma = np.asarray(sigma, dtype=float)
    mags = np.sort(np.abs(sigma), axis=-1)[..., ::-1]
    n = sigma.shape[-1]
    perm = _chamber_perm(order, n)
    out = np.empty_like(mags)
    for rank, axis in enumerate(perm):
        out[..., axis] = mags[..., rank]
    return out


def in_chamber(sigma, order=DEFAULT_CHAMBER, tol: float = 1e-12) -> bool:
    sigma = np.asarray(sigma, dtype=float)
    perm = _chamber_perm(order, sigma.size)
    ranked = sigma[perm]
    return bool(ranked[-1] >= -tol and np.all(np.diff(ranked) <= tol))


def schmidt_angle(sigma) -> float:
    """Schmidt angle ``chi`` in ``[0, pi/4]`` of a two-component vector."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (2,):
        raise ValueError("the Schmidt angle is defined for dmin = 2 only")
    a, b = weyl_project(sigma)
    return float(np.arctan2(b, a))


def singular_values(state: BipartiteState) -> np.ndarray:
    return np.linalg.svd(state.amplitudes, compute_uv=False)


def singular_value_velocity(state: BipartiteState, H) -> np.ndarray:
    """Instantaneous ``d sigma_i / dt`` under ``psi' = -i H psi``.

    First-order perturbation of the singular values; requires distinct
    non-zero singular values to be meaningful.  ``H`` is a dense matrix or a
    :class:`CouplingHamiltonian`.
    """
    if isinstance(H, CouplingHamiltonian):
        H = H.dense
    U, sigma = schmidt_decompose(state)
    Mdot = (-1j * np.asarray(H) @ state.vector).reshape(state.dims)
    m = sigma.size
    # sigma_i = V[:, i]^* M conj(W[:, i])
    return np.real(np.einsum("ji,jk,ki->i", U.V[:, :m].conj(), Mdot, U.W[:, :m].conj()))


Payload = Any


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise controls ``[(t_start, t_end, payload), ...]``.

    A payload is an :class:`InducedField`, a :class:`LocalUnitary` (the field
    is recomputed from ``H0``), a bare ``omega`` (3-vector or scalar), or a
    callable ``t -> payload`` for time-varying segments.  Outside every
    segment the field is zero.
    """

    segments: tuple
    H0: CouplingHamiltonian | None = None

    def __post_init__(self):
        segs = []
        for seg in self.segments:
            t0, t1, payload = seg
            t0, t1 = float(t0), float(t1)
            if not (np.isfinite(t0) and np.isfinite(t1)) or t1 < t0:
                raise ValueError(f"invalid segment bounds ({t0}, {t1})")
            segs.append((t0, t1, payload))
        segs.sort(key=lambda s: s[0])
        for (a0, a1, _), (b0, _b1, _) in zip(segs, segs[1:]):
            if b0 < a1 - 1e-12:
                raise ValueError("schedule segments overlap")
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def constant(cls, payload, T: float, H0=None) -> "ControlSchedule":
        return cls(((0.0, T, payload),), H0)

    @classmethod
    def from_durations(cls, items: Sequence[tuple], H0=None) -> "ControlSchedule":
        """Consecutive segments from ``(payload, duration)`` pairs."""
        segs, t = [], 0.0
        for payload, dur in items:
            segs.append((t, t + float(dur), payload))
            t += float(dur)
        return cls(tuple(segs), H0)

    def field(self, payload) -> InducedField:
        if isinstance(payload, InducedField):
            return payload
        if isinstance(payload, LocalUnitary):
            if self.H0 is None:
                raise ValueError("a LocalUnitary payload needs the schedule's H0")
            return induced_field(self.H0, payload)
        arr = np.asarray(payload, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite control value in schedule")
        return InducedField.from_angular_velocity(arr)


@dataclass(frozen=True)
class ReducedTrajectory:
    times: np.ndarray
    states: np.ndarray
    controls: tuple = field(default=())

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def norm_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


def integrate_reduced(sigma0, schedule: ControlSchedule, T: float, dt: float = 1e-3) -> ReducedTrajectory:
    """Solve ``sigma' = -H_U(t) sigma`` on ``[0, T]``.

    Constant segments are propagated by the exact rotation
    ``expm(-H_U h)``; callable segments use a fourth-order Magnus step of
    size at most ``dt``.  The returned grid contains every segment boundary.
    """
    sigma = np.asarray(sigma0, dtype=float)
    if abs(np.linalg.norm(sigma) - 1.0) > 1e-9:
        raise ValueError("initial Schmidt vector is not normalised")
    if not np.isfinite(T) or T < 0:
        raise ValueError(f"invalid horizon {T!r}")
    n = sigma.size

    # piece list covering [0, T]: zero field between segments
    pieces: list[tuple[float, float, Any]] = []
    t = 0.0
    for t0, t1, payload in schedule.segments:
        t0, t1 = max(t0, 0.0), min(t1, T)
        if t1 <= t0:
            continue
        if t0 > t:
            pieces.append((t, t0, None))
        pieces.append((t0, t1, payload))
        t = t1
    if t < T:
        pieces.append((t, T, None))

    times, states, controls = [np.array([0.0])], [sigma[None, :]], []
    for t0, t1, payload in pieces:
        if payload is None:
            G, const = np.zeros((n, n)), True
        elif callable(payload) and not isinstance(payload, (InducedField, LocalUnitary)):
            def G(s, _p=payload):
                return -schedule.field(_p(s)).generator
            const = False
        else:
            fld = schedule.field(payload)
            if fld.dmin != n:
                raise ValueError(f"field of size {fld.dmin} for a Schmidt vector of size {n}")
            G, const = -fld.generator, True
        ts, ys = propagate(sigma, G, t0, t1, dt, const)
        ys = np.real(ys)
        sigma = ys[-1]
        times.append(ts[1:])
        states.append(ys[1:])
        controls.append((t0, t1, payload))
    return ReducedTrajectory(np.concatenate(times), np.concatenate(states), tuple(controls))
