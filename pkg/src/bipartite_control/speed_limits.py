"""Closed-form speed limits of the reduced dynamics and a brute-force oracle.

The speed limit ``omega_star`` of a coupling is the largest rate at which the
Schmidt vector can be rotated by choosing the local frame.  Closed forms are
provided for two qubits, two bosonic qubits, two fermionic four-level systems
(lower and upper bounds) and two qutrits with equidistant spectra (a bound on
the 1-norm of the rotation vector).  :func:`brute_force_speed` searches over
local unitaries directly and serves as an independent check.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    CouplingHamiltonian,
    LocalUnitary,
    coefficient_matrix,
    coupling_from_coefficients,
    frame_for,
    haar_unitaries,
    su2_from_rotation,
)
from .reduced import induced_field, induced_generators

__all__ = [
    "SpeedLimitResult",
    "speed_limit_two_qubits",
    "speed_limit_bosonic",
    "fermionic_speed_bounds",
    "fermionic_velocity",
    "fermionic_achiever",
    "qutrit_speed_limit",
    "qutrit_vertex_frame",
    "octahedron_faces",
    "brute_force_speed",
    "brute_force_fermionic",
    "default_jobs",
    "pauli_coupling",
]

JOBS_ENV = "BIPARTITE_JOBS"
_D3 = np.diag([1.0, 1.0, -1.0])
_SWAP_XY = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class SpeedLimitResult:
    """A speed limit with the frame that attains it (when one is known).

    ``achiever`` is a :class:`LocalUnitary` for the distinguishable and
    bosonic cases, a 4x4 unitary for the fermionic lower bound, and a dict of
    vertex frames for the qutrit octahedron.
    """

    case: str
    omega_star: float
    achiever: object = None
    rotations: tuple | None = None
    bounds: tuple | None = None
    extra: dict = field(default_factory=dict)


def _proper(R: np.ndarray) -> np.ndarray:
    return R @ _D3 if np.linalg.det(R) < 0 else R


def _as_C(C) -> np.ndarray:
    if isinstance(C, CouplingHamiltonian):
        return coefficient_matrix(C).C
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3):
        raise ValueError(f"expected a 3x3 coefficient matrix, got shape {C.shape}")
    return C


def speed_limit_two_qubits(C) -> SpeedLimitResult:
    """``omega_star = s1 + s2`` for two qubits.

    The achiever rotates ``C`` into ``R_V^T C R_W = diag(s1, s2, +-s3) K``
    where ``K`` swaps the first two columns; the induced rate is then
    ``C'_xy + C'_yx = s1 + s2``.
    """
    C = _as_C(C)
    X, s, Yt = np.linalg.svd(C)
    RV = _proper(X)
    RW = _proper(Yt.T @ _SWAP_XY)
    U = LocalUnitary(su2_from_rotation(RV), su2_from_rotation(RW))
    return SpeedLimitResult(
        case="two-qubit",
        omega_star=float(s[0] + s[1]),
        achiever=U,
        rotations=(RV, RW),
        extra={"singular_values": s},
    )


_MIX = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, np.sqrt(2.0)]]) / np.sqrt(2.0)


def speed_limit_bosonic(C, tol: float = 1e-10) -> SpeedLimitResult:
    """``omega_star = l1 - l3`` for two bosonic qubits (symmetric ``C``).

    The achiever ``V (x) V`` brings ``C`` to a form with diagonal
    ``((l1 + l3)/2, (l1 + l3)/2, l2)`` and ``C'_xy = C'_yx = (l1 - l3)/2``.
    """
    C = _as_C(C)
    if np.max(np.abs(C - C.T)) > tol * max(1.0, np.max(np.abs(C))):
        raise ValueError("bosonic speed limit needs a symmetric coefficient matrix")
    lam, Q = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(-lam, kind="stable")
    lam, Q = lam[order], Q[:, order]
    R = _proper(Q[:, [0, 2, 1]] @ _MIX)
    V = su2_from_rotation(R)
    return SpeedLimitResult(
        case="bosonic",
        omega_star=float(lam[0] - lam[2]),
        achiever=LocalUnitary(V, V),
        rotations=(R, R),
        extra={"eigenvalues": lam},
    )


def _check_sorted(eigs, n: int) -> np.ndarray:
    eigs = np.asarray(eigs, dtype=float)
    if eigs.shape != (n,):
        raise ValueError(f"expected {n} eigenvalues, got shape {eigs.shape}")
    if np.any(np.diff(eigs) > 0):
        raise ValueError("eigenvalues must be sorted non-increasingly")
    return eigs


def fermionic_velocity(A, U=None) -> float:
    """Schmidt-angle rate ``Im(a13 a24 - a14 a23)`` with ``a = U^* A U``."""
    A = np.asarray(A, dtype=complex)
    a = A if U is None else np.asarray(U).conj().T @ A @ np.asarray(U)
    return float(np.imag(a[0, 2] * a[1, 3] - a[0, 3] * a[1, 2]))


def fermionic_achiever(eigs) -> np.ndarray:
    """Level-mixing unitary attaining the fermionic lower bound on ``diag(eigs)``.

    Levels 1 and 3 are mixed by a real Hadamard and levels 2 and 4 by a
    phased one, so that ``a13`` is real and ``a24`` purely imaginary.
    """
    h = 1.0 / np.sqrt(2.0)
    M = np.zeros((4, 4), dtype=complex)
    M[np.ix_([0, 2], [0, 2])] = [[h, h], [h, -h]]
    M[np.ix_([1, 3], [1, 3])] = [[h, 1j * h], [h, -1j * h]]
    return M


def fermionic_speed_bounds(eigs) -> SpeedLimitResult:
    """Lower and upper bounds on the fermionic ``d = 4`` speed limit.

    ``lower = (l1 - l3)(l2 - l4)/4`` is attained by :func:`fermionic_achiever`
    acting on ``diag(eigs)``; ``upper = (l1 + l2 - l3 - l4)^2 / 16``.
    """
    l1, l2, l3, l4 = _check_sorted(eigs, 4)
    lower = 0.25 * (l1 - l3) * (l2 - l4)
    upper = (l1 + l2 - l3 - l4) ** 2 / 16.0
    return SpeedLimitResult(
        case="fermionic-lower",
        omega_star=float(lower),
        achiever=fermionic_achiever(eigs),
        bounds=(float(lower), float(upper)),
    )


def _equidistant(lam: np.ndarray, tol: float) -> bool:
    return abs((lam[0] - lam[1]) - (lam[1] - lam[2])) <= tol * max(1.0, np.max(np.abs(lam)))


# index pair (i, j) with -(H_U)_{ij} equal to the axis component of omega
_AXIS_PAIRS = {0: (2, 1), 1: (0, 2), 2: (1, 0)}


def _vertex_forms(la: np.ndarray, lb: np.ndarray, axis: int, sign: float):
    i, j = _AXIS_PAIRS[axis]
    k = 3 - i - j
    At = np.zeros((3, 3), dtype=complex)
    Bt = np.zeros((3, 3), dtype=complex)
    At[i, i] = At[j, j] = 0.5 * (la[0] + la[2])
    At[k, k] = la[1]
    At[i, j] = At[j, i] = 0.5 * (la[0] - la[2])
    Bt[i, i] = Bt[j, j] = 0.5 * (lb[0] + lb[2])
    Bt[k, k] = lb[1]
    Bt[i, j] = -1j * sign * 0.5 * (lb[0] - lb[2])
    Bt[j, i] = np.conj(Bt[i, j])
    return At, Bt


def qutrit_vertex_frame(A, B, axis: int, sign: float = 1.0) -> LocalUnitary:
    """Frame whose induced ``omega`` is ``sign * omega_star * e_axis``."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    la = np.sort(np.linalg.eigvalsh(A))[::-1]
    lb = np.sort(np.linalg.eigvalsh(B))[::-1]
    At, Bt = _vertex_forms(la, lb, axis, sign)
    return LocalUnitary(frame_for(A, At), frame_for(B, Bt))


def qutrit_speed_limit(A, B, tol: float = 1e-10) -> SpeedLimitResult:
    """Octahedral bound for ``H0 = A (x) B`` on two qutrits.

    With equidistant spectra every induced ``omega`` satisfies
    ``||omega||_1 <= omega_star = (l1(A) - l3(A))(l1(B) - l3(B))/4`` and the
    six vertices ``+-omega_star e_i`` are attained.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != (3, 3) or B.shape != (3, 3):
        raise ValueError("qutrit speed limit needs 3x3 factors")
    la = np.sort(np.linalg.eigvalsh(A))[::-1]
    lb = np.sort(np.linalg.eigvalsh(B))[::-1]
    if not (_equidistant(la, tol) and _equidistant(lb, tol)):
        raise ValueError("the octahedral bound needs equidistant spectra for both factors")
    omega_star = 0.25 * (la[0] - la[2]) * (lb[0] - lb[2])
    vertices = {}
    for axis in range(3):
        for sign in (1.0, -1.0):
            key = ("+" if sign > 0 else "-") + "xyz"[axis]
            vertices[key] = qutrit_vertex_frame(A, B, axis, sign)
    return SpeedLimitResult(
        case="qutrit-octahedron",
        omega_star=float(omega_star),
        achiever=vertices,
        extra={"spectra": (la, lb)},
    )


def octahedron_faces() -> dict[str, np.ndarray]:
    """Barycenters of the vertices, edges and facets of the unit octahedron."""
    eye = np.eye(3)
    vertices = np.concatenate([eye, -eye])
    edges = []
    for i in range(3):
        for j in range(i + 1, 3):
            for si in (1, -1):
                for sj in (1, -1):
                    v = np.zeros(3)
                    v[i], v[j] = 0.5 * si, 0.5 * sj
                    edges.append(v)
    signs = np.array(np.meshgrid([1, -1], [1, -1], [1, -1], indexing="ij")).reshape(3, -1).T
    facets = signs / 3.0
    return {"vertices": vertices, "edges": np.array(edges), "facets": facets}


# brute force -----------------------------------------------------------------

_CHUNK = 2048


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def _objective_values(gens: np.ndarray, objective) -> np.ndarray:
    m = gens.shape[-1]
    if callable(objective):
        return np.asarray(objective(gens), dtype=float)
    if m == 2:
        w = gens[..., 1, 0]
        if objective in ("abs", "l1"):
            return np.abs(w)
        if objective == "signed":
            return w
        if objective == "negated":
            return -w
    elif m == 3:
        w = np.stack([-gens[..., 2, 1], -gens[..., 0, 2], -gens[..., 1, 0]], axis=-1)
        if objective == "abs":
            return np.linalg.norm(w, axis=-1)
        if objective == "l1":
            return np.sum(np.abs(w), axis=-1)
    raise ValueError(f"unsupported objective {objective!r} for dmin = {m}")


def _cayley(X: np.ndarray) -> np.ndarray:
    # X anti-Hermitian -> (1 - X/2)^{-1} (1 + X/2) is unitary
    eye = np.eye(X.shape[-1])
    return np.linalg.solve(eye - 0.5 * X, eye + 0.5 * X)


def _random_antihermitian(rng, n: int, d: int) -> np.ndarray:
    Z = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    return 0.5 * (Z - np.conj(np.swapaxes(Z, -1, -2))) / np.sqrt(d)


def _sample_chunk(args):
    H0, n, seed, symmetric, objective = args
    rng = np.random.default_rng(seed)
    d1, d2 = H0.dims
    Vs = haar_unitaries(n, d1, rng)
    Ws = Vs if symmetric else haar_unitaries(n, d2, rng)
    vals = _objective_values(induced_generators(H0, Vs, Ws), objective)
    keep = np.argsort(-vals, kind="stable")[: min(n, 16)]
    return vals[keep], Vs[keep], Ws[keep]


def _climb(args):
    H0, V, W, seed, symmetric, objective, iterations, step0 = args
    rng = np.random.default_rng(seed)
    d1, d2 = H0.dims
    best = _objective_values(induced_generators(H0, V[None], W[None]), objective)[0]
    step = step0
    for _ in range(iterations):
        dV = _cayley(step * _random_antihermitian(rng, 1, d1))[0]
        Vn = V @ dV
        if symmetric:
            Wn = Vn
        else:
            Wn = W @ _cayley(step * _random_antihermitian(rng, 1, d2))[0]
        val = _objective_values(induced_generators(H0, Vn[None], Wn[None]), objective)[0]
        if val > best:
            best, V, W = val, Vn, Wn
            step = min(step * 1.2, step0)
        else:
            step *= 0.93
        if step < 1e-7:
            break
    return best, V, W


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def brute_force_speed(
    H0: CouplingHamiltonian,
    objective: str | Callable = "abs",
    budget: int = 20000,
    seed: int = 0,
    symmetric: bool = False,
    restarts: int = 8,
    iterations: int = 600,
    jobs: int | None = None,
    return_frame: bool = False,
):
    """Best induced rate found over random local frames.

    ``budget`` Haar-random frames are scored, then the ``restarts`` best are
    refined by accept-if-better Cayley perturbations with a geometrically
    shrinking step.  ``objective`` is ``"abs"`` (``|omega|``), ``"l1"``
    (``||omega||_1``), ``"signed"`` / ``"negated"`` (``+-omega`` for
    ``dmin = 2``) or a callable on a stack of generators.  With
    ``symmetric=True`` the frame is restricted to ``V (x) V``.

    The result depends on ``seed`` only: work is cut into fixed chunks whose
    seeds are spawned from ``seed``, independent of ``jobs``.
    """
    if budget <= 0:
        raise ValueError("brute-force budget must be positive")
    if not isinstance(H0, CouplingHamiltonian):
        raise TypeError("expected a CouplingHamiltonian")
    if symmetric and H0.dims[0] != H0.dims[1]:
        raise ValueError("symmetric search needs equal local dimensions")
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    n_chunks = -(-budget // _CHUNK)
    root = np.random.SeedSequence(seed)
    sample_seeds = root.spawn(n_chunks + restarts)
    sizes = [min(_CHUNK, budget - k * _CHUNK) for k in range(n_chunks)]
    chunks = _map(
        _sample_chunk,
        [(H0, n, s, symmetric, objective) for n, s in zip(sizes, sample_seeds[:n_chunks])],
        jobs,
    )
    vals = np.concatenate([c[0] for c in chunks])
    Vs = np.concatenate([c[1] for c in chunks])
    Ws = np.concatenate([c[2] for c in chunks])
    top = np.argsort(-vals, kind="stable")[: max(1, restarts)]
    best_val, best_V, best_W = vals[top[0]], Vs[top[0]], Ws[top[0]]
    if restarts > 0 and iterations > 0:
        results = _map(
            _climb,
            [
                (H0, Vs[i], Ws[i], s, symmetric, objective, iterations, 0.3)
                for i, s in zip(top, sample_seeds[n_chunks:])
            ],
            jobs,
        )
        for val, V, W in results:
            if val > best_val:
                best_val, best_V, best_W = val, V, W
    if return_frame:
        return float(best_val), LocalUnitary(best_V, best_W)
    return float(best_val)


def brute_force_fermionic(
    A,
    budget: int = 20000,
    seed: int = 0,
    restarts: int = 8,
    iterations: int = 600,
) -> float:
    """Largest ``|omega^a_U|`` found over random ``U`` in ``U(4)``."""
    if budget <= 0:
        raise ValueError("brute-force budget must be positive")
    A = np.asarray(A, dtype=complex)
    if A.shape != (4, 4):
        raise ValueError("fermionic search needs a 4x4 Hermitian factor")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def score(Us):
        a = np.conj(np.swapaxes(Us, -1, -2)) @ A @ Us
        return np.abs(np.imag(a[:, 0, 2] * a[:, 1, 3] - a[:, 0, 3] * a[:, 1, 2]))

    Us = haar_unitaries(budget, 4, rng)
    vals = score(Us)
    top = np.argsort(-vals, kind="stable")[: max(1, restarts)]
    best = float(vals[top[0]])
    for i in top:
        U, cur, step = Us[i], vals[i], 0.3
        for _ in range(iterations):
            Un = U @ _cayley(step * _random_antihermitian(rng, 1, 4))[0]
            val = score(Un[None])[0]
            if val > cur:
                U, cur, step = Un, val, min(step * 1.2, 0.3)
            else:
                step *= 0.93
            if step < 1e-7:
                break
        best = max(best, float(cur))
    return best


def pauli_coupling(C) -> CouplingHamiltonian:
    """Two-qubit coupling ``sum_ij C_ij P_i (x) P_j``."""
    return coupling_from_coefficients(np.asarray(C, dtype=float))
