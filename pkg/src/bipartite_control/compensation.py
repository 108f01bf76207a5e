r"""Compensating and stabilising local Hamiltonians.

Under ``psi' = -i H psi`` the velocity splits into a part that changes the
singular values and a part tangent to the local-unitary orbit of ``psi``.  A
compensating Hamiltonian ``H_c = E (x) 1 + 1 (x) F`` cancels the tangent part
of the coupling, so that the state moves straight across orbits.  When the
coupling does not change the singular values either, ``H_c`` stabilises them.

Closed forms below are stated in a local frame ``U = V (x) W``: they give
``V^* E V`` and ``W^* F W`` for the coupling ``U^* H0 U`` with coefficient
matrix ``C'`` and the frame state ``cos(chi)|00> + sin(chi)|11>``.  The
returned :class:`LocalHamiltonian` is rotated back to the laboratory frame.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    PAULI_Y,
    PAULI_Z,
    STRUCT_TOL,
    BipartiteState,
    CouplingHamiltonian,
    LocalUnitary,
    hermitian_basis,
    is_hermitian,
)
from .reduced import weyl_project

__all__ = [
    "PoleError",
    "NonRegularStateWarning",
    "LocalHamiltonian",
    "StabilizationReport",
    "tangent_map",
    "orbit_drift",
    "compensating_general",
    "comp_qubits_closed_form",
    "stabilizer_qubits_diagonal",
    "stabilizer_qubits_product_safe",
    "comp_bosonic",
    "fermionic_frame_coupling",
    "fermionic_state",
    "comp_fermionic",
    "fermionic_diagonal_stabilizer",
    "embedded_pauli_y",
    "comp_qutrit_detour",
    "detour_coefficient",
    "qutrit_stabilizer",
    "check_stabilized",
]

POLE_TOL = 1e-9
PSEUDO_INVERSE_CUTOFF = 1e-10


class PoleError(ValueError):
    """A closed form was evaluated at (or too close to) one of its poles."""


class NonRegularStateWarning(UserWarning):
    """The state has repeated or vanishing singular values."""


@dataclass(frozen=True)
class LocalHamiltonian:
    """Local control ``E (x) 1 + 1 (x) F``."""

    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        E = np.array(self.E, dtype=complex)
        F = np.array(self.F, dtype=complex)
        for name, X in (("E", E), ("F", F)):
            if not np.all(np.isfinite(X)):
                raise ValueError(f"{name} has non-finite entries")
            if not is_hermitian(X, STRUCT_TOL):
                raise ValueError(f"{name} is not Hermitian")
            X.setflags(write=False)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F", F)

    @classmethod
    def in_frame(cls, E_frame, F_frame, frame: LocalUnitary | None = None) -> "LocalHamiltonian":
        """Build from ``V^* E V`` and ``W^* F W``."""
        E_frame = np.asarray(E_frame, dtype=complex)
        F_frame = np.asarray(F_frame, dtype=complex)
        if frame is None:
            return cls(E_frame, F_frame)
        V, W = frame.V, frame.W
        return cls(V @ E_frame @ V.conj().T, W @ F_frame @ W.conj().T)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.E.shape[0], self.F.shape[0])

    @property
    def dense(self) -> np.ndarray:
        d1, d2 = self.dims
        return np.kron(self.E, np.eye(d2)) + np.kron(np.eye(d1), self.F)

    def __add__(self, other: "LocalHamiltonian") -> "LocalHamiltonian":
        return LocalHamiltonian(self.E + other.E, self.F + other.F)

    def scaled(self, factor: float) -> "LocalHamiltonian":
        return LocalHamiltonian(factor * self.E, factor * self.F)


# general construction --------------------------------------------------------


def _realify(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag])


def _full_basis(d: int) -> list[np.ndarray]:
    return [np.sqrt(2.0 / d) * np.eye(d, dtype=complex)] + list(hermitian_basis(d))


def _local_generators(dims, symmetric: bool):
    """Basis of local Hamiltonians paired with its ``(E, F)`` blocks."""
    d1, d2 = dims
    I1, I2 = np.eye(d1), np.eye(d2)
    gens = []
    if symmetric:
        for G in _full_basis(d1):
            gens.append((np.kron(G, I2) + np.kron(I1, G), G, G))
    else:
        Z1, Z2 = np.zeros((d1, d1)), np.zeros((d2, d2))
        for G in _full_basis(d1):
            gens.append((np.kron(G, I2), G, Z2))
        for G in _full_basis(d2):
            gens.append((np.kron(I1, G), Z1, G))
    return gens


def tangent_map(psi: BipartiteState, symmetric: bool = False) -> np.ndarray:
    """Real matrix sending local Hamiltonian coordinates to ``-i H_loc psi``."""
    if symmetric and psi.dims[0] != psi.dims[1]:
        raise ValueError("symmetric local controls need equal local dimensions")
    v = psi.vector
    return np.array([_realify(-1j * (G @ v)) for G, _, _ in _local_generators(psi.dims, symmetric)]).T


def _orbit_basis(psi: BipartiteState, symmetric: bool) -> np.ndarray:
    L = tangent_map(psi, symmetric)
    U, s, _ = np.linalg.svd(L, full_matrices=False)
    rank = int(np.sum(s > PSEUDO_INVERSE_CUTOFF * max(1.0, s[0])))
    Q = U[:, :rank]
    # remove the global-phase direction -i psi
    ph = _realify(-1j * psi.vector)
    ph /= np.linalg.norm(ph)
    Q = Q - np.outer(ph, ph @ Q)
    Uq, sq, _ = np.linalg.svd(Q, full_matrices=False)
    return Uq[:, sq > 1e-8]


def _dense(H, dims) -> np.ndarray:
    if isinstance(H, CouplingHamiltonian):
        return H.dense
    if isinstance(H, LocalHamiltonian):
        return H.dense
    H = np.asarray(H, dtype=complex)
    n = dims[0] * dims[1]
    if H.shape != (n, n):
        raise ValueError(f"Hamiltonian of shape {H.shape} does not match dims {dims}")
    return H


def orbit_drift(psi: BipartiteState, H, symmetric: bool = False) -> float:
    """Size of the component of ``-i H psi`` along the local orbit.

    The global-phase direction is excluded.  Zero means that ``H`` moves
    ``psi`` orthogonally to its local-unitary orbit.
    """
    v = _realify(-1j * (_dense(H, psi.dims) @ psi.vector))
    Q = _orbit_basis(psi, symmetric)
    return float(np.linalg.norm(Q.T @ v))


def _is_regular(sigma: np.ndarray, tol: float = 1e-8) -> bool:
    return bool(np.all(sigma > tol) and np.all(np.abs(np.diff(sigma)) > tol))


def compensating_general(
    psi: BipartiteState,
    H0,
    symmetric: bool = False,
    rcond: float = PSEUDO_INVERSE_CUTOFF,
) -> LocalHamiltonian:
    """Minimal-norm local Hamiltonian cancelling the orbit drift of ``H0``.

    Solves ``L x = -(-i H0 psi)`` in the least-squares sense with the real
    linear map ``L`` of :func:`tangent_map` over an orthonormal Hermitian
    basis, using a singular-value cutoff ``rcond``.  Because the basis is
    orthonormal, the minimal coordinate norm is the minimal Hilbert-Schmidt
    norm.  Non-regular states are accepted with a
    :class:`NonRegularStateWarning`.
    """
    dims = psi.dims
    H = _dense(H0, dims)
    sigma = np.linalg.svd(psi.amplitudes, compute_uv=False)
    if min(dims) > 1 and not _is_regular(sigma) and not symmetric:
        warnings.warn(
            f"state is not regular (singular values {np.round(sigma, 10)}); "
            "the compensating Hamiltonian is not unique",
            NonRegularStateWarning,
            stacklevel=2,
        )
    gens = _local_generators(dims, symmetric)
    L = np.array([_realify(-1j * (G @ psi.vector)) for G, _, _ in gens]).T
    target = _realify(1j * (H @ psi.vector))
    x, *_ = np.linalg.lstsq(L, target, rcond=rcond)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("compensating Hamiltonian solve produced non-finite values")
    E = sum(c * g[1] for c, g in zip(x, gens))
    F = sum(c * g[2] for c, g in zip(x, gens))
    return LocalHamiltonian(E, F)


# qubit closed forms ----------------------------------------------------------


def _near(chi: float, period: float) -> bool:
    r = np.remainder(chi, period)
    return bool(min(r, period - r) < POLE_TOL)


def _Cprime(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3) or not np.all(np.isfinite(C)):
        raise ValueError("expected a finite 3x3 coefficient matrix")
    return C


def comp_qubits_closed_form(Cprime, chi: float, frame: LocalUnitary | None = None) -> LocalHamiltonian:
    """Two-qubit compensating Hamiltonian for ``chi`` away from multiples of ``pi/4``."""
    C = _Cprime(Cprime)
    if _near(chi, np.pi / 4):
        raise PoleError(f"chi = {chi!r} is within {POLE_TOL} of a multiple of pi/4")
    x, y, z = 0, 1, 2
    t, s2, sec = np.tan(chi), np.sin(2 * chi), 1.0 / np.cos(2 * chi)
    d11 = 0.5 * (C[z, z] + (C[x, x] - C[y, y]) * t)
    d22 = 0.5 * (C[z, z] + (C[x, x] - C[y, y]) / t)
    e12 = sec * (C[x, z] - 1j * C[y, z] - (C[z, x] + 1j * C[z, y]) * s2)
    f12 = sec * (C[z, x] - 1j * C[z, y] - (C[x, z] + 1j * C[y, z]) * s2)
    Et = -np.array([[d11, e12], [np.conj(e12), d22]])
    Ft = -np.array([[d11, f12], [np.conj(f12), d22]])
    return LocalHamiltonian.in_frame(Et, Ft, frame)


def stabilizer_qubits_diagonal(Cprime, chi: float, frame: LocalUnitary | None = None, tol: float = 1e-10) -> LocalHamiltonian:
    """Stabiliser for a diagonal ``C'``; valid up to and including ``chi = pi/4``.

    ``V^* E V = W^* F W = -(C'_zz + D csc(2 chi))/2 + (D/2) cot(2 chi) P_z``
    with ``D = C'_xx - C'_yy``.
    """
    C = _Cprime(Cprime)
    if np.max(np.abs(C - np.diag(np.diag(C)))) > tol * max(1.0, np.max(np.abs(C))):
        raise ValueError("the diagonal stabiliser needs a diagonal coefficient matrix")
    D = C[0, 0] - C[1, 1]
    if abs(D) <= tol * max(1.0, np.max(np.abs(C))):
        Et = -0.5 * C[2, 2] * np.eye(2)
    else:
        if _near(chi, np.pi / 2):
            raise PoleError("the diagonal stabiliser diverges at product states")
        Et = -0.5 * (C[2, 2] + D / np.sin(2 * chi)) * np.eye(2) + 0.5 * D / np.tan(2 * chi) * PAULI_Z
    return LocalHamiltonian.in_frame(Et, Et, frame)


def stabilizer_qubits_product_safe(Cprime, chi: float, frame: LocalUnitary | None = None, tol: float = 1e-10) -> LocalHamiltonian:
    """Stabiliser that stays bounded at product states.

    Needs ``C'_xx = C'_yy``.  The formula also assumes the remaining
    couplings it omits to be absent, namely ``C'_xz = C'_zx = 0`` and
    ``C'_xy = -C'_yx`` (the frame field itself vanishes); both are checked.
    """
    C = _Cprime(Cprime)
    scale = tol * max(1.0, np.max(np.abs(C)))
    if abs(C[0, 0] - C[1, 1]) > scale:
        raise ValueError("the product-safe stabiliser needs C'_xx = C'_yy")
    if abs(C[0, 2]) > scale or abs(C[2, 0]) > scale or abs(C[0, 1] + C[1, 0]) > scale:
        raise ValueError("the product-safe stabiliser needs C'_xz = C'_zx = 0 and C'_xy = -C'_yx")
    if _near(chi - np.pi / 4, np.pi / 2):
        raise PoleError("the product-safe stabiliser diverges at maximally entangled states")
    sec, s2 = 1.0 / np.cos(2 * chi), np.sin(2 * chi)
    Et = -0.5 * C[2, 2] * np.eye(2) - sec * (C[1, 2] + C[2, 1] * s2) * PAULI_Y
    Ft = -0.5 * C[2, 2] * np.eye(2) - sec * (C[2, 1] + C[1, 2] * s2) * PAULI_Y
    return LocalHamiltonian.in_frame(Et, Ft, frame)


def comp_bosonic(Cprime, chi: float, frame: LocalUnitary | None = None, tol: float = 1e-10) -> LocalHamiltonian:
    """Symmetric compensating Hamiltonian ``E (x) 1 + 1 (x) E`` for bosonic qubits.

    Poles are only reported where the diverging term has a non-zero
    coefficient, so the ``chi -> 0`` limit is available when
    ``C'_xx = C'_yy``.
    """
    C = _Cprime(Cprime)
    scale = tol * max(1.0, np.max(np.abs(C)))
    if np.max(np.abs(C - C.T)) > scale:
        raise ValueError("bosonic coefficient matrix must be symmetric")
    if frame is not None and np.max(np.abs(frame.V - frame.W)) > 1e-12:
        raise ValueError("bosonic frames must be of the form V (x) V")
    D = C[0, 0] - C[1, 1]
    off = abs(C[0, 2]) + abs(C[1, 2])
    if abs(D) > scale and (_near(chi, np.pi / 2) or _near(chi - np.pi / 2, np.pi)):
        raise PoleError(f"chi = {chi!r} is a pole of the tan/cot terms")
    if off > scale and _near(chi - np.pi / 4, np.pi / 2):
        raise PoleError(f"chi = {chi!r} is a pole of the sec(2 chi) terms")
    d11 = 0.5 * C[2, 2] + (0.5 * D * np.tan(chi) if abs(D) > scale else 0.0)
    d22 = 0.5 * C[2, 2] + (0.5 * D / np.tan(chi) if abs(D) > scale else 0.0)
    if off > scale:
        sec, s2 = 1.0 / np.cos(2 * chi), np.sin(2 * chi)
        e12 = sec * (C[0, 2] - 1j * C[1, 2] - (C[0, 2] + 1j * C[1, 2]) * s2)
    else:
        e12 = 0.0
    Et = -np.array([[d11, e12], [np.conj(e12), d22]])
    return LocalHamiltonian.in_frame(Et, Et, frame)


# fermionic closed forms ------------------------------------------------------


def _antisym(i: int, j: int, d: int = 4) -> np.ndarray:
    M = np.zeros((d, d), dtype=complex)
    M[i, j] = 1.0
    M[j, i] = -1.0
    return M / np.sqrt(2.0)


def fermionic_state(chi: float, frame: np.ndarray | None = None) -> BipartiteState:
    """``cos(chi) e_12 + sin(chi) e_34`` with ``e_ij = (|ij> - |ji>)/sqrt(2)``.

    ``frame`` is an optional one-particle unitary ``V`` applied as ``V (x) V``.
    """
    M = np.cos(chi) * _antisym(0, 1) + np.sin(chi) * _antisym(2, 3)
    if frame is not None:
        V = np.asarray(frame, dtype=complex)
        M = V @ M @ V.T
    return BipartiteState((4, 4), M)


def fermionic_frame_coupling(eigs) -> np.ndarray:
    """One-particle Hamiltonian ``U^* A U`` with levels 1-3 and 2-4 mixed.

    This is the real form in which the fermionic compensating Hamiltonian is
    stated; the coupling is ``A (x) A``.
    """
    l1, l2, l3, l4 = np.asarray(eigs, dtype=float)
    return 0.5 * np.array(
        [
            [l1 + l3, 0, l1 - l3, 0],
            [0, l2 + l4, 0, l2 - l4],
            [l1 - l3, 0, l1 + l3, 0],
            [0, l2 - l4, 0, l2 + l4],
        ],
        dtype=complex,
    )


def comp_fermionic(eigs, chi: float, frame: np.ndarray | None = None) -> LocalHamiltonian:
    """Fermionic compensating Hamiltonian ``E (x) 1 + 1 (x) E`` (``d = 4``).

    ``V^* E V = -E~ - (l1 + l3)(l2 + l4)/8`` in the basis of
    :func:`fermionic_frame_coupling`; singular at product states
    ``chi = k pi/2`` and regular at ``chi = pi/4``.
    """
    l1, l2, l3, l4 = np.asarray(eigs, dtype=float)
    if _near(chi, np.pi / 2):
        raise PoleError(f"chi = {chi!r} is a product state (pole of tan/cot)")
    t = np.tan(chi)
    p = (l1 - l3) * (l2 - l4) / 8.0
    a = (l1 - l3) * (l2 + l4) / 4.0
    b = (l1 + l3) * (l2 - l4) / 4.0
    Et = np.array(
        [
            [p * t, 0, a, 0],
            [0, p * t, 0, b],
            [a, 0, p / t, 0],
            [0, b, 0, p / t],
        ],
        dtype=complex,
    )
    E = -Et - (l1 + l3) * (l2 + l4) / 8.0 * np.eye(4)
    if frame is not None:
        V = np.asarray(frame, dtype=complex)
        E = V @ E @ V.conj().T
    return LocalHamiltonian(E, E)


def fermionic_diagonal_stabilizer(eigs, frame: np.ndarray | None = None) -> LocalHamiltonian:
    """``chi``-independent stabiliser in a basis diagonalising ``A``."""
    l1, l2, l3, l4 = np.asarray(eigs, dtype=float)
    E = -np.diag([l1 * l2, l1 * l2, l3 * l4, l3 * l4]).astype(complex) / 2.0
    if frame is not None:
        V = np.asarray(frame, dtype=complex)
        E = V @ E @ V.conj().T
    return LocalHamiltonian(E, E)


# qutrit closed forms ---------------------------------------------------------


def embedded_pauli_y() -> np.ndarray:
    """Pauli-y acting on the first two of three levels."""
    P = np.zeros((3, 3), dtype=complex)
    P[:2, :2] = PAULI_Y
    return P


def detour_coefficient(epsilon: float, sigma_z: float = 1.0) -> float:
    """``sigma_z / (2 sqrt(2) epsilon)``."""
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    return float(sigma_z / (2.0 * np.sqrt(2.0) * epsilon))


def comp_qutrit_detour(epsilon: float, sigma_z: float, frame: LocalUnitary | None = None) -> LocalHamiltonian:
    """Compensator keeping ``sigma_x - sigma_y = sqrt(2) epsilon`` on the detour.

    In the detour frame ``V^* E V = W^* F W = c P'_y`` with
    ``c = sigma_z / (2 sqrt(2) epsilon)``.
    """
    Et = detour_coefficient(epsilon, sigma_z) * embedded_pauli_y()
    return LocalHamiltonian.in_frame(Et, Et, frame)


def qutrit_stabilizer(frame: LocalUnitary | None = None) -> LocalHamiltonian:
    """Stabiliser of the maximally entangled qutrit state for ``A = B = diag(1, 0, -1)``.

    ``V^* E V = W^* F W = -diag(1/2, 0, 1/2)``; this makes the state an exact
    eigenvector of ``H0 + H_c``.
    """
    Et = -np.diag([0.5, 0.0, 0.5]).astype(complex)
    return LocalHamiltonian.in_frame(Et, Et, frame)


# verification harness --------------------------------------------------------


@dataclass(frozen=True)
class StabilizationReport:
    case: str
    chi_or_state: object
    max_drift: float
    horizon: float
    tolerance: float
    passed: bool
    times: np.ndarray = field(repr=False, compare=False, default=None)
    drift: np.ndarray = field(repr=False, compare=False, default=None)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "chi_or_state": self.chi_or_state,
            "max_drift": float(self.max_drift),
            "horizon": float(self.horizon),
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def check_stabilized(
    psi: BipartiteState,
    H0,
    Hc: LocalHamiltonian | None,
    T: float,
    tol: float = 1e-6,
    n_times: int = 401,
    case: str = "custom",
    label=None,
) -> StabilizationReport:
    """Integrate ``psi' = -i(H0 + H_c) psi`` and track singular-value drift.

    The Hamiltonian is constant, so the flow is evaluated exactly through
    its eigendecomposition on ``n_times`` equally spaced times in ``[0, T]``.
    Drift is the largest deviation of the Weyl-projected singular values
    from their initial value.
    """
    if not np.isfinite(T) or T < 0:
        raise ValueError(f"invalid horizon {T!r}")
    H = _dense(H0, psi.dims)
    if Hc is not None:
        H = H + Hc.dense
    if not is_hermitian(H, 1e-10):
        raise ValueError("total Hamiltonian is not Hermitian")
    lam, Q = np.linalg.eigh(H)
    c = Q.conj().T @ psi.vector
    times = np.linspace(0.0, T, n_times)
    states = (Q @ (np.exp(-1j * np.outer(lam, times)) * c[:, None])).T
    d1, d2 = psi.dims
    svs = np.linalg.svd(states.reshape(-1, d1, d2), compute_uv=False)
    proj = weyl_project(svs)
    drift = np.max(np.abs(proj - proj[0]), axis=1)
    max_drift = float(np.max(drift))
    if not np.isfinite(max_drift):
        raise FloatingPointError("integration produced non-finite states")
    return StabilizationReport(
        case=case,
        chi_or_state=label,
        max_drift=max_drift,
        horizon=float(T),
        tolerance=float(tol),
        passed=max_drift <= tol,
        times=times,
        drift=drift,
    )
