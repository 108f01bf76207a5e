r"""Full Schrödinger simulation and lifting of reduced solutions.

The central experiment is the qutrit detour: the reduced optimum from
``|33>`` to the maximally entangled state runs along ``sigma_x = sigma_y``,
where no compensating Hamiltonian exists.  The lifted protocol instead
follows the nearby circle ``sigma_x - sigma_y = sqrt(2) epsilon``, which
costs a compensator of size ``O(1/epsilon)``.  With the compensator frozen
at its initial value the final distance ``C(epsilon)`` to the maximally
entangled point is small but oscillates in ``epsilon``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from ._integrators import magnus4_step, step_grid
from .compensation import LocalHamiltonian, embedded_pauli_y
from .core import (
    BipartiteState,
    CouplingHamiltonian,
    LocalUnitary,
    coefficient_matrix,
    diag_state,
    frame_for,
    is_hermitian,
)
from .reduced import weyl_project
from .speed_limits import default_jobs, speed_limit_two_qubits

__all__ = [
    "StateFeedback",
    "HamiltonianSchedule",
    "SimulationResult",
    "CostCurve",
    "schrodinger_integrate",
    "t_star",
    "detour_target_forms",
    "detour_frame",
    "detour_path",
    "drift_only",
    "epsilon_protocol",
    "cost_C",
    "transformed_cost",
    "epsilon_minima",
    "sweep_cost",
    "local_cost_minima",
    "fit_minima_constants",
    "lift_two_qubit_protocol",
    "MAX_ENTANGLED_3",
    "X0",
    "DELTA_X",
]

X0 = 0.0048
DELTA_X = 2.3252
MAX_ENTANGLED_3 = np.ones(3) / np.sqrt(3.0)
NORM_TOL = 1e-9


def t_star() -> float:
    """Time to reach the maximally entangled point at ``omega_star = 1``."""
    return float(np.sqrt(2.0) * np.arccos(1.0 / np.sqrt(3.0)))


# schedules -------------------------------------------------------------------


@dataclass(frozen=True)
class StateFeedback:
    """Hamiltonian that depends on the current state, ``fn(t, psi) -> H``."""

    fn: Callable[[float, np.ndarray], Any]


def _matrix(payload, dims) -> np.ndarray:
    if isinstance(payload, (CouplingHamiltonian, LocalHamiltonian)):
        return np.asarray(payload.dense)
    if isinstance(payload, (list, tuple)):
        return sum(_matrix(p, dims) for p in payload)
    H = np.asarray(payload, dtype=complex)
    n = dims[0] * dims[1]
    if H.shape != (n, n):
        raise ValueError(f"Hamiltonian of shape {H.shape} does not match dims {dims}")
    if not np.all(np.isfinite(H)):
        raise ValueError("Hamiltonian has non-finite entries")
    if not is_hermitian(H, 1e-10):
        raise ValueError("Hamiltonian is not Hermitian")
    return H


@dataclass(frozen=True)
class HamiltonianSchedule:
    """Piecewise Hamiltonian ``[(t_start, t_end, payload), ...]``.

    A payload is a dense matrix, a :class:`CouplingHamiltonian`, a
    :class:`LocalHamiltonian`, a list of these (summed), a callable
    ``t -> H`` or a :class:`StateFeedback`.  Between segments ``H = 0``.
    """

    segments: tuple

    def __post_init__(self):
        segs = sorted(((float(a), float(b), p) for a, b, p in self.segments), key=lambda s: s[0])
        for a, b, _ in segs:
            if not (np.isfinite(a) and np.isfinite(b)) or b < a:
                raise ValueError(f"invalid segment bounds ({a}, {b})")
        for (_, a1, _), (b0, _, _) in zip(segs, segs[1:]):
            if b0 < a1 - 1e-12:
                raise ValueError("schedule segments overlap")
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def constant(cls, payload, T: float) -> "HamiltonianSchedule":
        return cls(((0.0, T, payload),))

    @classmethod
    def from_durations(cls, items: Sequence[tuple]) -> "HamiltonianSchedule":
        segs, t = [], 0.0
        for payload, dur in items:
            segs.append((t, t + float(dur), payload))
            t += float(dur)
        return cls(tuple(segs))


@dataclass(frozen=True)
class SimulationResult:
    times: np.ndarray
    states: np.ndarray
    dims: tuple
    singular: np.ndarray = field(repr=False)

    @property
    def final(self) -> BipartiteState:
        return BipartiteState(self.dims, self.states[-1])

    @property
    def final_singular(self) -> np.ndarray:
        return self.singular[-1]

    def norm_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


def _track(states: np.ndarray, dims) -> np.ndarray:
    svs = np.linalg.svd(states.reshape(-1, *dims), compute_uv=False)
    return weyl_project(svs)


def schrodinger_integrate(
    psi0: BipartiteState,
    schedule,
    T: float,
    dt: float = 1e-3,
) -> SimulationResult:
    """Integrate ``psi' = -i H(t) psi`` on ``[0, T]``.

    Constant segments use exact exponentials, callable segments a
    fourth-order Magnus step and state feedback an exponential midpoint
    step.  ``schedule`` may also be a single constant payload.
    """
    if not isinstance(psi0, BipartiteState):
        raise TypeError("expected a BipartiteState")
    if not np.isfinite(T) or T < 0:
        raise ValueError(f"invalid horizon {T!r}")
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError(f"invalid step {dt!r}")
    if not isinstance(schedule, HamiltonianSchedule):
        schedule = HamiltonianSchedule.constant(schedule, T)
    dims = psi0.dims
    n = dims[0] * dims[1]

    pieces, t = [], 0.0
    for a, b, p in schedule.segments:
        a, b = max(a, 0.0), min(b, T)
        if b <= a:
            continue
        if a > t:
            pieces.append((t, a, None))
        pieces.append((a, b, p))
        t = b
    if t < T:
        pieces.append((t, T, None))

    psi = psi0.vector.astype(complex)
    times, states = [0.0], [psi.copy()]
    for a, b, p in pieces:
        grid = step_grid(a, b, dt)
        if isinstance(p, StateFeedback):
            for k in range(1, grid.size):
                h = grid[k] - grid[k - 1]
                H0 = _matrix(p.fn(grid[k - 1], psi), dims)
                half = expm(-0.5j * h * H0) @ psi
                Hm = _matrix(p.fn(grid[k - 1] + 0.5 * h, half), dims)
                psi = expm(-1j * h * Hm) @ psi
                states.append(psi)
        elif p is None or not callable(p) or isinstance(p, (CouplingHamiltonian, LocalHamiltonian)):
            H = np.zeros((n, n)) if p is None else _matrix(p, dims)
            lam, Q = np.linalg.eigh(H)
            c = Q.conj().T @ psi
            phases = np.exp(-1j * np.outer(grid[1:] - a, lam))
            seg_states = (phases * c) @ Q.T
            psi = seg_states[-1]
            states.extend(seg_states)
        else:
            def G(s, _p=p):
                return -1j * _matrix(_p(s), dims)
            for k in range(1, grid.size):
                psi = magnus4_step(G, grid[k - 1], grid[k] - grid[k - 1]) @ psi
                states.append(psi)
        times.extend(grid[1:])
    states = np.array(states)
    result = SimulationResult(np.array(times), states, dims, _track(states, dims))
    if result.norm_error() > NORM_TOL:
        raise FloatingPointError(f"norm drifted by {result.norm_error():.3g}")
    return result


# qutrit detour ---------------------------------------------------------------


def detour_target_forms() -> tuple[np.ndarray, np.ndarray]:
    """The frame forms ``V^* A V`` and ``W^* B W`` of the detour."""
    s = 1.0 / np.sqrt(2.0)
    At = s * np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=complex)
    Bt = s * np.array([[0, 0, -1j], [0, 0, -1j], [1j, 1j, 0]], dtype=complex)
    return At, Bt


def _default_qutrit_factors(A, B):
    D = np.diag([1.0, 0.0, -1.0]).astype(complex)
    A = D if A is None else np.asarray(A, dtype=complex)
    B = D if B is None else np.asarray(B, dtype=complex)
    return A, B


def detour_frame(A=None, B=None) -> LocalUnitary:
    """A frame ``U = V (x) W`` realising the detour forms for ``A (x) B``.

    Any ``U`` with ``V^* A V`` and ``W^* B W`` equal to the target forms
    works; the one returned is built from eigenbases and is otherwise an
    arbitrary gauge choice.  ``A`` and ``B`` must have spectrum ``(1, 0, -1)``.
    """
    A, B = _default_qutrit_factors(A, B)
    At, Bt = detour_target_forms()
    return LocalUnitary(frame_for(A, At), frame_for(B, Bt))


def detour_path(t, epsilon: float) -> np.ndarray:
    """Reduced detour path on ``sigma_x - sigma_y = sqrt(2) epsilon``."""
    t = np.asarray(t, dtype=float)
    a = np.sqrt(1.0 - epsilon**2) * np.sin(t / np.sqrt(2.0))
    return np.stack(
        [(a + epsilon) / np.sqrt(2.0), (a - epsilon) / np.sqrt(2.0), np.sqrt(1.0 - epsilon**2) * np.cos(t / np.sqrt(2.0))],
        axis=-1,
    )


def _frame_setup(A, B):
    A, B = _default_qutrit_factors(A, B)
    U = detour_frame(A, B)
    H0 = CouplingHamiltonian(((A, B),))
    return U, H0


def drift_only(times, A=None, B=None) -> SimulationResult:
    """Free evolution of ``|33>`` under the detour-frame coupling ``U^* H0 U``."""
    U, H0 = _frame_setup(A, B)
    Hf = H0.conjugated(U).dense
    times = np.asarray(times, dtype=float)
    lam, Q = np.linalg.eigh(Hf)
    psi0 = np.zeros(9, dtype=complex)
    psi0[8] = 1.0
    c = Q.conj().T @ psi0
    states = (np.exp(-1j * np.outer(times, lam)) * c) @ Q.T
    return SimulationResult(times, states, (3, 3), _track(states, (3, 3)))


MODES = ("state-dependent", "time-dependent", "constant")


def epsilon_protocol(
    epsilon: float,
    mode: str = "time-dependent",
    T: float | None = None,
    dt: float = 1e-3,
    A=None,
    B=None,
) -> SimulationResult:
    """Run the detour protocol in the laboratory frame of ``H0 = A (x) B``.

    ``time-dependent`` and ``state-dependent`` start from the detour state
    ``(e/sqrt2)|11> - (e/sqrt2)|22> + sqrt(1 - e^2)|33>`` in the frame and
    use the compensator coefficient ``sqrt(1 - e^2) cos(t/sqrt2)`` or the
    frame ``|33>`` amplitude respectively.  ``constant`` starts from
    ``U|33>`` with the coefficient frozen at ``1/(2 sqrt2 e)``.  The default
    horizon is :func:`t_star`.
    """
    if not np.isfinite(epsilon) or not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    T = t_star() if T is None else float(T)
    U, H0 = _frame_setup(A, B)
    V, W = U.V, U.W
    Py = embedded_pauli_y()
    K = np.kron(V @ Py @ V.conj().T, np.eye(3)) + np.kron(np.eye(3), W @ Py @ W.conj().T)
    Hd = H0.dense
    k0 = 1.0 / (2.0 * np.sqrt(2.0) * epsilon)

    if mode == "constant":
        frame_state = np.zeros((3, 3), dtype=complex)
        frame_state[2, 2] = 1.0
        psi0 = BipartiteState((3, 3), frame_state).evolve(U)
        return schrodinger_integrate(psi0, HamiltonianSchedule.constant(Hd + k0 * K, T), T, dt)

    s = np.sqrt(1.0 - epsilon**2)
    frame_state = np.diag([epsilon / np.sqrt(2.0), -epsilon / np.sqrt(2.0), s]).astype(complex)
    psi0 = BipartiteState((3, 3), frame_state).evolve(U)
    if mode == "time-dependent":
        def H(t):
            return Hd + k0 * s * np.cos(t / np.sqrt(2.0)) * K
        payload = H
    else:
        probe = np.kron(V, W)[:, 8]

        def Hfb(t, psi):
            sigma_z = abs(np.vdot(probe, psi))
            return Hd + k0 * sigma_z * K
        payload = StateFeedback(Hfb)
    return schrodinger_integrate(psi0, HamiltonianSchedule.constant(payload, T), T, dt)


def _constant_mode_final(epsilon: float) -> np.ndarray:
    At, Bt = detour_target_forms()
    Py = embedded_pauli_y()
    I3 = np.eye(3)
    H = np.kron(At, Bt) + (1.0 / (2.0 * np.sqrt(2.0) * epsilon)) * (np.kron(Py, I3) + np.kron(I3, Py))
    lam, Q = np.linalg.eigh(H)
    c = Q.conj()[8]
    psi = Q @ (np.exp(-1j * lam * t_star()) * c)
    return np.sort(np.linalg.svd(psi.reshape(3, 3), compute_uv=False))


def cost_C(epsilon: float) -> float:
    """Distance of the final Schmidt vector to ``(1, 1, 1)/sqrt(3)``.

    Constant-coefficient detour from ``U|33>`` run to :func:`t_star`.  The
    singular values are frame independent, so the run is done in the frame.
    """
    if not np.isfinite(epsilon) or not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return float(np.linalg.norm(_constant_mode_final(float(epsilon)) - MAX_ENTANGLED_3))


def transformed_cost(x: float) -> float:
    """``sqrt(3) C(1/(2 sqrt2 x)) (2 sqrt2 x - 1)``."""
    x = float(x)
    if not np.isfinite(x) or x <= 1.0 / (2.0 * np.sqrt(2.0)):
        raise ValueError(f"x must exceed 1/(2 sqrt 2), got {x!r}")
    r = 2.0 * np.sqrt(2.0) * x
    return float(np.sqrt(3.0) * cost_C(1.0 / r) * (r - 1.0))


def epsilon_minima(k: float, x0: float = X0, dx: float = DELTA_X) -> float:
    """``epsilon_k = 1 / (2 sqrt2 (x0 + k dx))``; half-integer ``k`` gives near-maxima."""
    x = x0 + k * dx
    if x <= 0:
        raise ValueError(f"k = {k!r} gives a non-positive x")
    eps = 1.0 / (2.0 * np.sqrt(2.0) * x)
    if not (0.0 < eps < 1.0):
        raise ValueError(f"k = {k!r} gives epsilon = {eps:.6g} outside (0, 1)")
    return float(eps)


@dataclass(frozen=True)
class CostCurve:
    epsilons: np.ndarray
    costs: np.ndarray
    xs: np.ndarray = field(init=False)
    transformed: np.ndarray = field(init=False)

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        costs = np.asarray(self.costs, dtype=float)
        r = 1.0 / eps
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "xs", r / (2.0 * np.sqrt(2.0)))
        object.__setattr__(self, "transformed", np.sqrt(3.0) * costs * (r - 1.0))


def _costs(eps_chunk):
    return [cost_C(e) for e in eps_chunk]


def sweep_cost(
    eps_min: float,
    eps_max: float,
    n: int,
    include: Sequence[float] = (),
    jobs: int | None = None,
) -> CostCurve:
    """``C`` on a log-spaced grid, plus any extra ``include`` points."""
    if not (0.0 < eps_min < eps_max < 1.0):
        raise ValueError("need 0 < eps_min < eps_max < 1")
    if int(n) < 2:
        raise ValueError("need at least two grid points")
    grid = np.geomspace(eps_min, eps_max, int(n))
    if len(include):
        grid = np.unique(np.concatenate([grid, np.asarray(include, dtype=float)]))
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs > 1 and grid.size > 1:
        chunks = np.array_split(grid, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            costs = [c for part in pool.map(_costs, chunks) for c in part]
    else:
        costs = _costs(grid)
    return CostCurve(grid, np.array(costs))


def local_cost_minima(x_max: float = 35.0, x_min: float = 1.0, samples_per_unit: int = 40) -> np.ndarray:
    """Local minima of ``C`` as values of ``x = 1/(2 sqrt2 epsilon)``.

    Brackets come from a uniform scan in ``x`` and are polished with a
    bounded scalar minimiser.
    """
    lo = max(x_min, 1.0 / (2.0 * np.sqrt(2.0)) + 1e-6)
    xs = np.linspace(lo, x_max, int((x_max - lo) * samples_per_unit) + 1)

    def c_of_x(x):
        return cost_C(1.0 / (2.0 * np.sqrt(2.0) * x))

    vals = np.array([c_of_x(x) for x in xs])
    out = []
    for i in range(1, xs.size - 1):
        if vals[i] <= vals[i - 1] and vals[i] < vals[i + 1]:
            res = minimize_scalar(c_of_x, bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                                  options={"xatol": 1e-10})
            out.append(res.x)
    return np.array(out)


def fit_minima_constants(minima_x: np.ndarray | None = None, k_start: int = 1) -> dict:
    """Least-squares fit ``x_k = x0 + k dx`` to located minima.

    Returns the fitted and the reference constants side by side.
    """
    if minima_x is None:
        minima_x = local_cost_minima()
    minima_x = np.asarray(minima_x, dtype=float)
    ks = np.arange(k_start, k_start + minima_x.size)
    dx, x0 = np.polyfit(ks, minima_x, 1)
    return {
        "x0_fit": float(x0),
        "dx_fit": float(dx),
        "x0_reference": X0,
        "dx_reference": DELTA_X,
        "minima_x": minima_x.tolist(),
        "k": ks.tolist(),
        "max_residual": float(np.max(np.abs(x0 + dx * ks - minima_x))),
    }


# two-qubit lift --------------------------------------------------------------


def lift_two_qubit_protocol(H0: CouplingHamiltonian, reverse: bool = False, dt: float = 1e-3) -> SimulationResult:
    """Time-optimal entangling (or disentangling) protocol for two qubits.

    Step 1 applies the achieving frame ``U`` instantly, step 2 evolves under
    ``H0 + H_c`` with the constant ``H_c = -C'_zz 1`` (plus the negated local
    part of ``H0``) for ``(pi/4)/(s1 + s2)``.  Forward starts from ``|00>``;
    ``reverse`` starts from ``U (|00> + |11>)/sqrt2`` and ends at a product
    state.
    """
    if not isinstance(H0, CouplingHamiltonian) or H0.dims != (2, 2):
        raise ValueError("the two-qubit protocol needs a 2x2 CouplingHamiltonian")
    cm = coefficient_matrix(H0)
    res = speed_limit_two_qubits(cm.C)
    w = res.omega_star
    if w <= 1e-12:
        raise ValueError("s1 + s2 = 0: the coupling cannot change entanglement")
    U = res.achiever
    RV, RW = res.rotations
    Czz = float((RV.T @ cm.C @ RW)[2, 2])
    Hc = -Czz * np.eye(4) - cm.local_part()
    sigma = [1.0 / np.sqrt(2.0)] * 2 if reverse else [1.0, 0.0]
    psi0 = diag_state(sigma).evolve(U)
    T = (np.pi / 4.0) / w
    return schrodinger_integrate(psi0, HamiltonianSchedule.constant(H0.dense + Hc, T), T, dt)
