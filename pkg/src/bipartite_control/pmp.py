r"""Time-optimal planning on the Schmidt sphere with the octahedral control set.

After rescaling to ``omega_star = 1`` the reduced system for two qutrits with
equidistant spectra reads ``sigma' = u x sigma`` with ``||u||_1 <= 1``.  With
``l = sigma x p`` the Pontryagin pseudo-Hamiltonian is ``u . l`` and the
costate obeys ``l' = u x l``.  Maximising controls are barycenters of the
octahedron face selected by the dominant components of ``l``.

Every control piece is a rotation about a fixed axis, so arcs and switching
instants are computed in closed form rather than by numerical event search.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .reduced import ControlSchedule, in_chamber, integrate_reduced

__all__ = [
    "DeadlockError",
    "Face",
    "AdjointPath",
    "PMPPlan",
    "NORTH_POLE",
    "optimal_control_set",
    "first_integrals",
    "classify_trajectory",
    "switch_duration",
    "integrate_adjoint",
    "north_pole_times",
    "synthesize_plan",
]

NORTH_POLE = np.array([0.0, 0.0, 1.0])
SEPARATRIX = 1.0 / np.sqrt(2.0)
FACET_LEVEL = 1.0 / np.sqrt(3.0)
TIE_TOL = 1e-12
SEGMENT_FLOOR = 1e-12
# positive-octant switching order x -> z -> y -> x
_NEXT = {0: 2, 2: 1, 1: 0}


class DeadlockError(RuntimeError):
    """An unstable equilibrium was reached and no dwell time was configured."""


@dataclass(frozen=True)
class Face:
    kind: str
    vertices: tuple
    barycenter: np.ndarray


def _check_l(l) -> np.ndarray:
    l = np.asarray(l, dtype=float)
    if l.shape != (3,) or not np.all(np.isfinite(l)):
        raise ValueError("costate must be a finite 3-vector")
    if np.linalg.norm(l) == 0.0:
        raise ValueError("the abnormal case l = 0 is not supported")
    return l


def _dominant(l: np.ndarray, tol: float = TIE_TOL) -> list[int]:
    a = np.abs(l)
    H = a.max()
    return [i for i in range(3) if a[i] >= H - tol * max(1.0, np.linalg.norm(l))]


def optimal_control_set(l) -> Face:
    """Face of the octahedron maximising ``u . l`` and its barycenter."""
    l = _check_l(l)
    idx = _dominant(l)
    verts = []
    for i in idx:
        v = np.zeros(3)
        v[i] = np.sign(l[i])
        verts.append(v)
    kind = {1: "vertex", 2: "edge", 3: "facet"}[len(idx)]
    return Face(kind, tuple(verts), np.mean(verts, axis=0))


def first_integrals(l) -> tuple[float, float]:
    """``(L^2, H)`` with ``H = max |l_i|``."""
    l = np.asarray(l, dtype=float)
    return float(l @ l), float(np.max(np.abs(l)))


def classify_trajectory(H: float, tol: float = 1e-12) -> str:
    """``'constant'``, ``'switching'`` or ``'separatrix'`` for ``L = 1``."""
    if not (FACET_LEVEL - tol <= H <= 1.0 + tol):
        raise ValueError(f"H = {H!r} is outside [1/sqrt(3), 1]")
    if abs(H - SEPARATRIX) <= tol:
        return "separatrix"
    return "constant" if H > SEPARATRIX else "switching"


def switch_duration(H: float, tol: float = 1e-12) -> float:
    """Time between two switches, ``pi/2 - 2 arccos(H / sqrt(1 - H^2))``."""
    if not (FACET_LEVEL - tol <= H < SEPARATRIX):
        raise ValueError(f"switching needs H in [1/sqrt(3), 1/sqrt(2)), got {H!r}")
    arg = H / np.sqrt(1.0 - H * H)
    return float(np.pi / 2 - 2.0 * np.arccos(np.clip(arg, 0.0, 1.0)))


# adjoint integration ---------------------------------------------------------


@dataclass(frozen=True)
class AdjointPath:
    """Sampled costate path with the control pieces that generated it."""

    times: np.ndarray
    l: np.ndarray
    switch_times: tuple
    pieces: tuple  # (t_start, t_end, u, kind)

    def durations(self) -> np.ndarray:
        return np.array([t1 - t0 for t0, t1, _, _ in self.pieces])


def _rotate(l: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
    return Rotation.from_rotvec(u * t).apply(l)


def _cyclic(i: int) -> tuple[int, int]:
    return (i + 1) % 3, (i + 2) % 3


def _vertex_event(l: np.ndarray, i: int, s: float, H: float, horizon: float):
    """First time a passive component of ``l`` climbs to ``H`` under ``u = s e_i``.

    Returns ``(t, l_event)`` or ``None``.  Under this control the pair
    ``(l_j, l_k)`` with ``(i, j, k)`` cyclic rotates rigidly at rate ``s``.
    """
    j, k = _cyclic(i)
    r = float(np.hypot(l[j], l[k]))
    if r < H * (1.0 - 1e-12):
        return None
    phi0 = np.arctan2(l[k], l[j])
    # near-tangential contact is treated as the separatrix touch; the
    # arccos below is too ill-conditioned there to resolve it
    tangent = r - H <= 1e-9 * max(H, 1e-300)
    h = 1.0 if tangent else H / r
    a = np.arccos(h)
    b = np.arcsin(h)
    # angles where |cos| = h (component j) or |sin| = h (component k)
    cands = [(a, j), (-a, j), (np.pi - a, j), (np.pi + a, j),
             (b, k), (np.pi - b, k), (-b, k), (np.pi + b, k)]
    best = None
    for ang, comp in cands:
        delta = np.remainder(s * (ang - phi0), 2 * np.pi)
        if delta <= 1e-12 or delta >= 2 * np.pi - 1e-9:
            continue
        # only count crossings where |component| is rising or touching
        if comp == j:
            rate = -np.sin(ang) * s * np.sign(np.cos(ang))
        else:
            rate = np.cos(ang) * s * np.sign(np.sin(ang))
        if rate < -1e-9:
            continue
        if best is None or delta < best[0]:
            best = (delta, ang, comp)
    if best is None or best[0] > horizon:
        return None
    delta, ang, comp = best
    out = l.copy()
    out[j], out[k] = r * np.cos(ang), r * np.sin(ang)
    # snap the reached component onto the cube face
    out[comp] = np.sign(out[comp]) * H
    other = k if comp == j else j
    out[other] = 0.0 if tangent else np.sign(out[other]) * np.sqrt(max(r * r - H * H, 0.0))
    return delta, out


def _leave_choice(l: np.ndarray, tied: list[int], policy) -> int:
    """Vertex to follow from a tie between dominant components."""
    if callable(policy):
        return int(policy(l, tuple(tied)))
    ok = []
    for i in tied:
        u = np.zeros(3)
        u[i] = np.sign(l[i]) or 1.0
        ldot = np.cross(u, l)
        if all(np.sign(l[j]) * ldot[j] <= 1e-12 for j in tied if j != i):
            ok.append(i)
    if len(ok) == 1:
        return ok[0]
    pool = ok or list(tied)
    if len(tied) == 2:
        a, b = tied
        if _NEXT[a] == b and b in pool:
            return b
        if _NEXT[b] == a and a in pool:
            return a
    return pool[0]


def integrate_adjoint(
    l0,
    T: float,
    dt: float = 1e-2,
    policy: str | Callable = "cycle",
    dwell: float | Sequence[float] | None = None,
) -> AdjointPath:
    """Follow ``l' = u x l`` with ``u`` a maximising barycenter on ``[0, T]``.

    A single dominant component gives a vertex control, three give the
    (stationary) facet control.  At a two-way tie the state is either a
    switching point, left along the vertex that keeps the other tied
    component non-increasing, or the unstable edge equilibrium.  There the
    costate rests for the configured ``dwell`` time (a number, or one value
    per visit) before leaving; without one a :class:`DeadlockError` is
    raised.  ``policy`` may be a callable ``(l, tied) -> index`` overriding
    the default positive-octant order ``x -> z -> y -> x``.
    """
    l = _check_l(l0).copy()
    if not np.isfinite(T) or T < 0:
        raise ValueError(f"invalid horizon {T!r}")
    if dwell is None:
        dwells: list[float] | None = None
    elif np.ndim(dwell) == 0:
        dwells = None
        dwell_const = float(dwell)
    else:
        dwells = [float(x) for x in dwell]
    L = np.linalg.norm(l)
    H = float(np.max(np.abs(l)))

    pieces = []
    starts = []
    switches = []
    t = 0.0
    prev_u = None
    while t < T - 1e-15:
        idx = _dominant(l)
        remaining = T - t
        if len(idx) == 3:
            u = np.sign(l) / 3.0
            pieces.append((t, T, u, "facet"))
            starts.append(l.copy())
            t = T
            break
        if len(idx) == 2:
            k = 3 - sum(idx)
            if abs(l[k]) <= 1e-9 * L:
                # unstable edge equilibrium
                if dwell is None:
                    raise DeadlockError(
                        f"unstable equilibrium l = {l} reached at t = {t:.12g} without a dwell time"
                    )
                if dwells is None:
                    rest = dwell_const
                elif dwells:
                    rest = dwells.pop(0)
                else:
                    raise DeadlockError("dwell schedule exhausted at an unstable equilibrium")
                u = np.zeros(3)
                for i in idx:
                    u[i] = 0.5 * np.sign(l[i])
                rest = min(rest, remaining)
                if rest > 0:
                    pieces.append((t, t + rest, u, "edge"))
                    starts.append(l.copy())
                    t += rest
                    prev_u = u
                if t >= T - 1e-15:
                    break
            i = _leave_choice(l, idx, policy)
        else:
            i = idx[0]
        s = float(np.sign(l[i]))
        u = np.zeros(3)
        u[i] = s
        ev = _vertex_event(l, i, s, H, remaining)
        if prev_u is not None and not np.array_equal(prev_u, u):
            switches.append(t)
        starts.append(l.copy())
        if ev is None:
            pieces.append((t, T, u, "vertex"))
            l = _rotate(l, u, remaining)
            t = T
        else:
            step, l_new = ev
            pieces.append((t, t + step, u, "vertex"))
            l = l_new
            t += step
        prev_u = u

    times = np.arange(0.0, T + 0.5 * dt, dt) if T > 0 else np.array([0.0])
    times = np.unique(np.concatenate([times[times <= T], [T], [p[0] for p in pieces]]))
    samples = np.empty((times.size, 3))
    if not pieces:
        samples[:] = _check_l(l0)
        return AdjointPath(times, samples, (), ())
    piece_starts = np.array([p[0] for p in pieces])
    for n, tt in enumerate(times):
        p = max(0, int(np.searchsorted(piece_starts, tt, side="right")) - 1)
        t0, _t1, u, _ = pieces[p]
        samples[n] = _rotate(starts[p], u, tt - t0)
    return AdjointPath(times, samples, tuple(switches), tuple(pieces))


# north-pole synthesis --------------------------------------------------------


def _check_target(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (3,) or not np.all(np.isfinite(tau)):
        raise ValueError("target must be a finite 3-vector")
    if abs(np.linalg.norm(tau) - 1.0) > 1e-9:
        raise ValueError("target is not a unit vector")
    if not in_chamber(tau, tol=1e-9):
        raise ValueError(f"target {tau} is outside the Weyl chamber sigma_z >= sigma_x >= sigma_y >= 0")
    return tau


def north_pole_times(tau) -> tuple[float, float]:
    """Durations ``(T1, T2)`` of the two arcs from the north pole to ``tau``.

    ``T1`` follows ``u = (-1/2, 1/2, 0)`` and equals
    ``sqrt(2) arccos(sqrt(1 - 2 tau_y^2))``; ``T2`` follows ``u = (0, 1, 0)``.
    Both are evaluated in ``atan2`` form, which is exact at the chamber
    edges where the ``arccos`` forms lose precision.
    """
    tau = _check_target(tau)
    tx, ty, tz = tau
    c = np.sqrt(max(1.0 - 2.0 * ty * ty, 0.0))
    T1 = np.sqrt(2.0) * np.arctan2(np.sqrt(2.0) * ty, c)
    T2 = np.arctan2(tx * c - tz * ty, tx * ty + tz * c)
    return float(T1), float(max(T2, 0.0))


@dataclass(frozen=True)
class PMPPlan:
    segments: tuple  # ((u, duration), ...)
    target: np.ndarray
    omega_star: float = 1.0
    start: np.ndarray = field(default_factory=lambda: NORTH_POLE.copy())

    @property
    def total_time(self) -> float:
        return float(sum(d for _, d in self.segments))

    def schedule(self) -> ControlSchedule:
        """Reduced schedule with rotation vectors scaled by ``omega_star``."""
        return ControlSchedule.from_durations(
            [(self.omega_star * np.asarray(u), d) for u, d in self.segments]
        )

    def endpoint(self) -> np.ndarray:
        sigma = np.asarray(self.start, dtype=float)
        for u, d in self.segments:
            sigma = _rotate(sigma, self.omega_star * np.asarray(u), d)
        return sigma

    def trajectory(self, dt: float = 1e-3):
        return integrate_reduced(self.start, self.schedule(), self.total_time, dt)

    def to_dict(self) -> dict:
        return {
            "target": [float(x) for x in self.target],
            "segments": [{"u": [float(x) for x in u], "duration": float(d)} for u, d in self.segments],
            "total_time": self.total_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def synthesize_plan(tau, omega_star: float = 1.0) -> PMPPlan:
    """Two-arc time-optimal plan from the north pole to a chamber point.

    Durations are physical times for a coupling with speed limit
    ``omega_star``; arcs shorter than ``1e-12`` are dropped.
    """
    if not np.isfinite(omega_star) or omega_star <= 0:
        raise ValueError("omega_star must be positive")
    tau = _check_target(tau)
    T1, T2 = north_pole_times(tau)
    segs = []
    if T1 > SEGMENT_FLOOR:
        segs.append((np.array([-0.5, 0.5, 0.0]), T1 / omega_star))
    if T2 > SEGMENT_FLOOR:
        segs.append((np.array([0.0, 1.0, 0.0]), T2 / omega_star))
    return PMPPlan(tuple(segs), tau, omega_star)
