r"""Bipartite states, coupling Hamiltonians and their decompositions.

A pure state on :math:`\mathbb{C}^{d_1}\otimes\mathbb{C}^{d_2}` is stored as its
amplitude matrix ``M[i, j] = <ij|psi>``.  A local unitary :math:`V\otimes W`
acts on that matrix as ``V @ M @ W.T``, so a Schmidt decomposition is nothing
but the complex singular value decomposition of ``M``.

Traceless Hermitian operator bases are normalised with the Hilbert-Schmidt
convention ``tr(A_i A_j) = 2 delta_ij``.  For ``d = 2`` the basis is the Pauli
triple ``(P_x, P_y, P_z)``; for larger ``d`` it is the generalised Gell-Mann
basis (off-diagonal symmetric / antisymmetric pairs first, diagonal elements
last).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

__all__ = [
    "STRUCT_TOL",
    "RECON_TOL",
    "PAULI",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "BipartiteState",
    "CouplingHamiltonian",
    "CoefficientMatrix",
    "LocalUnitary",
    "hermitian_basis",
    "is_hermitian",
    "is_unitary",
    "haar_unitary",
    "haar_unitaries",
    "random_hermitian",
    "random_state",
    "diag_state",
    "schmidt_decompose",
    "coefficient_matrix",
    "coupling_from_coefficients",
    "diagonalize_coupling",
    "symmetric_diagonalize",
    "rotation_from_su2",
    "su2_from_rotation",
    "frame_for",
    "swap_operator",
]

STRUCT_TOL = 1e-12
RECON_TOL = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (PAULI_X, PAULI_Y, PAULI_Z)


def _scaled_tol(tol, *arrays):
    scale = max([1.0] + [float(np.max(np.abs(a))) for a in arrays if np.size(a)])
    return tol * scale


def is_hermitian(H, tol=STRUCT_TOL) -> bool:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        return False
    return bool(np.max(np.abs(H - H.conj().T), initial=0.0) <= _scaled_tol(tol, H))


def is_unitary(U, tol=STRUCT_TOL) -> bool:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol * U.shape[0])


@lru_cache(maxsize=None)
def _basis_cached(d: int) -> tuple:
    basis = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k] = -1j
            anti[k, j] = 1j
            basis.extend([sym, anti])
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * diag).astype(complex))
    for b in basis:
        b.setflags(write=False)
    return tuple(basis)


def hermitian_basis(d: int) -> tuple[np.ndarray, ...]:
    """Orthonormal traceless Hermitian basis of size ``d**2 - 1``.

    Normalised so that ``tr(A_i A_j) = 2 delta_ij``; for ``d = 2`` this is
    ``(P_x, P_y, P_z)`` in that order.
    """
    if d < 2:
        raise ValueError(f"operator basis needs d >= 2, got {d}")
    return _basis_cached(int(d))


def _full_basis(d: int) -> list[np.ndarray]:
    # identity scaled to the same Hilbert-Schmidt norm as the traceless part
    return [np.sqrt(2.0 / d) * np.eye(d, dtype=complex)] + list(hermitian_basis(d))


def swap_operator(d: int) -> np.ndarray:
    S = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            S[j * d + i, i * d + j] = 1.0
    return S


@dataclass(frozen=True)
class BipartiteState:
    """Pure state with amplitude matrix ``amplitudes[i, j] = <ij|psi>``."""

    dims: tuple[int, int]
    amplitudes: np.ndarray
    tol: float = field(default=STRUCT_TOL, repr=False, compare=False)

    def __post_init__(self):
        d1, d2 = (int(d) for d in self.dims)
        if d1 < 1 or d2 < 1:
            raise ValueError(f"dimensions must be positive, got {self.dims}")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.size != d1 * d2:
            raise ValueError(
                f"amplitude grid of size {amps.size} does not match dims {d1}x{d2}"
            )
        if amps.ndim == 2 and amps.shape != (d1, d2):
            raise ValueError(f"amplitude grid has shape {amps.shape}, dims say {(d1, d2)}")
        amps = amps.reshape(d1, d2).copy()
        amps.setflags(write=False)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > self.tol:
            raise ValueError(f"state is not normalised: |psi| = {norm!r}")
        object.__setattr__(self, "dims", (d1, d2))
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, dims, normalize: bool = False) -> "BipartiteState":
        vec = np.asarray(vec, dtype=complex)
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(tuple(dims), vec)

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @property
    def dmin(self) -> int:
        return min(self.dims)

    def evolve(self, U) -> "BipartiteState":
        """Apply a (global) unitary given as a matrix or :class:`LocalUnitary`."""
        if isinstance(U, LocalUnitary):
            return BipartiteState(self.dims, U.V @ self.amplitudes @ U.W.T)
        return BipartiteState(self.dims, np.asarray(U) @ self.vector)


@dataclass(frozen=True)
class LocalUnitary:
    """A product unitary ``V (x) W``."""

    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        V = np.array(self.V, dtype=complex)
        W = np.array(self.W, dtype=complex)
        for name, X in (("V", V), ("W", W)):
            if not is_unitary(X):
                raise ValueError(f"{name} is not unitary")
            X.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)

    @classmethod
    def identity(cls, dims) -> "LocalUnitary":
        return cls(np.eye(dims[0]), np.eye(dims[1]))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.V.shape[0], self.W.shape[0])

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.kron(self.V, self.W)

    def dagger(self) -> "LocalUnitary":
        return LocalUnitary(self.V.conj().T, self.W.conj().T)

    def __matmul__(self, other: "LocalUnitary") -> "LocalUnitary":
        return LocalUnitary(self.V @ other.V, self.W @ other.W)


def _as_term(A, B):
    A = np.array(A, dtype=complex)
    B = np.array(B, dtype=complex)
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("coupling terms must be square matrices")
    A.setflags(write=False)
    B.setflags(write=False)
    return A, B


@dataclass(frozen=True)
class CouplingHamiltonian:
    """Hermitian operator ``sum_k A_k (x) B_k`` stored by its product terms.

    The term list is the source of truth; :attr:`dense` is computed lazily.
    """

    terms: tuple
    tol: float = field(default=STRUCT_TOL, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(_as_term(A, B) for A, B in self.terms)
        if not terms:
            raise ValueError("a coupling Hamiltonian needs at least one term")
        d1, d2 = terms[0][0].shape[0], terms[0][1].shape[0]
        for k, (A, B) in enumerate(terms):
            if A.shape != (d1, d1) or B.shape != (d2, d2):
                raise ValueError(f"term {k} has inconsistent dimensions")
            if not is_hermitian(A, self.tol) or not is_hermitian(B, self.tol):
                raise ValueError(f"term {k} is not a product of Hermitian matrices")
        object.__setattr__(self, "terms", terms)

    @property
    def dims(self) -> tuple[int, int]:
        A, B = self.terms[0]
        return (A.shape[0], B.shape[0])

    @cached_property
    def dense(self) -> np.ndarray:
        H = sum(np.kron(A, B) for A, B in self.terms)
        H.setflags(write=False)
        return H

    @classmethod
    def from_dense(cls, H, dims, tol: float = STRUCT_TOL) -> "CouplingHamiltonian":
        """Split a dense Hermitian matrix into Hermitian product terms."""
        H = np.asarray(H, dtype=complex)
        d1, d2 = dims
        if H.shape != (d1 * d2, d1 * d2):
            raise ValueError(f"matrix of shape {H.shape} does not match dims {dims}")
        if not is_hermitian(H, tol):
            raise ValueError("Hamiltonian is not Hermitian")
        ga, gb = _full_basis(d1), _full_basis(d2)
        # tr((G_i x G_j)(G_k x G_l)) = 4 delta_ik delta_jl
        coeffs = np.array(
            [[np.trace(H @ np.kron(a, b)).real / 4.0 for b in gb] for a in ga]
        )
        terms = []
        for j, b in enumerate(gb):
            col = coeffs[:, j]
            if np.any(np.abs(col) > 0):
                terms.append((sum(c * a for c, a in zip(col, ga)), b))
        if not terms:
            terms = [(np.zeros((d1, d1)), np.zeros((d2, d2)))]
        return cls(tuple(terms), tol=tol)

    def conjugated(self, U: LocalUnitary) -> "CouplingHamiltonian":
        """Return ``U^* H U`` (term-wise)."""
        V, W = U.V, U.W
        return CouplingHamiltonian(
            tuple((V.conj().T @ A @ V, W.conj().T @ B @ W) for A, B in self.terms),
            tol=self.tol,
        )

    def scaled(self, factor: float) -> "CouplingHamiltonian":
        return CouplingHamiltonian(
            tuple((factor * A, B) for A, B in self.terms), tol=self.tol
        )

    def swap_residual(self) -> float:
        d1, d2 = self.dims
        if d1 != d2:
            return np.inf
        S = swap_operator(d1)
        return float(np.max(np.abs(S @ self.dense @ S - self.dense)))


@dataclass(frozen=True)
class CoefficientMatrix:
    """Coupling coefficients in a product operator basis plus the local parts.

    ``H = sum_ij C[i, j] A_i (x) B_j + E_loc (x) 1 + 1 (x) F_loc + trace * 1``
    with ``E_loc`` and ``F_loc`` traceless.
    """

    C: np.ndarray
    E_loc: np.ndarray
    F_loc: np.ndarray
    trace: float
    dims: tuple[int, int]

    @property
    def basis_a(self):
        return hermitian_basis(self.dims[0])

    @property
    def basis_b(self):
        return hermitian_basis(self.dims[1])

    def coupling_part(self) -> np.ndarray:
        return sum(
            self.C[i, j] * np.kron(a, b)
            for i, a in enumerate(self.basis_a)
            for j, b in enumerate(self.basis_b)
        )

    def local_part(self) -> np.ndarray:
        d1, d2 = self.dims
        return (
            np.kron(self.E_loc, np.eye(d2))
            + np.kron(np.eye(d1), self.F_loc)
            + self.trace * np.eye(d1 * d2)
        )

    def reassemble(self) -> np.ndarray:
        return self.coupling_part() + self.local_part()


def _coerce_hamiltonian(H0, dims=None) -> tuple[np.ndarray, tuple[int, int]]:
    if isinstance(H0, CouplingHamiltonian):
        return H0.dense, H0.dims
    H = np.asarray(H0, dtype=complex)
    if dims is None:
        raise ValueError("dims are required for a dense Hamiltonian")
    if not is_hermitian(H):
        raise ValueError("Hamiltonian is not Hermitian")
    return H, tuple(dims)


def coefficient_matrix(H0, dims=None) -> CoefficientMatrix:
    """Coefficient matrix of ``H0`` and its local parts.

    The local parts are the orthogonal (Hilbert-Schmidt) projections of ``H0``
    onto ``E (x) 1``, ``1 (x) F`` and ``1 (x) 1``.
    """
    H, (d1, d2) = _coerce_hamiltonian(H0, dims)
    if not is_hermitian(H):
        raise ValueError("Hamiltonian is not Hermitian")
    ba, bb = hermitian_basis(d1), hermitian_basis(d2)
    C = np.array([[np.trace(H @ np.kron(a, b)).real / 4.0 for b in bb] for a in ba])
    Ia, Ib = np.eye(d1), np.eye(d2)
    E = sum(np.trace(H @ np.kron(a, Ib)).real / (2.0 * d2) * a for a in ba)
    F = sum(np.trace(H @ np.kron(Ia, b)).real / (2.0 * d1) * b for b in bb)
    trace = np.trace(H).real / (d1 * d2)
    return CoefficientMatrix(C=C, E_loc=E, F_loc=F, trace=trace, dims=(d1, d2))


def coupling_from_coefficients(C, E_loc=None, F_loc=None, trace: float = 0.0):
    """Inverse of :func:`coefficient_matrix` for a dense ``C``."""
    C = np.asarray(C, dtype=float)
    d1 = int(round(np.sqrt(C.shape[0] + 1)))
    d2 = int(round(np.sqrt(C.shape[1] + 1)))
    ba, bb = hermitian_basis(d1), hermitian_basis(d2)
    terms = []
    for j, b in enumerate(bb):
        A = sum(C[i, j] * a for i, a in enumerate(ba))
        terms.append((A, b))
    if E_loc is not None:
        terms.append((E_loc, np.eye(d2)))
    if F_loc is not None:
        terms.append((np.eye(d1), F_loc))
    if trace:
        terms.append((trace * np.eye(d1), np.eye(d2)))
    return CouplingHamiltonian(tuple(terms))


def diagonalize_coupling(H0, dims=None, tol: float = RECON_TOL):
    """Diagonal form ``sum_i w_i A_i (x) B_i`` of the coupling part.

    Returns a list of ``(A_i, B_i, w_i)`` with orthonormal ``A_i``, ``B_i``
    (``tr(A_i A_j) = 2 delta_ij``) and ``w_i > 0`` non-increasing; the
    number of terms is the numerical rank of the coefficient matrix.
    """
    cm = coefficient_matrix(H0, dims)
    X, s, Yt = np.linalg.svd(cm.C)
    ba, bb = cm.basis_a, cm.basis_b
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    out = []
    for k in range(rank):
        A = sum(X[i, k] * a for i, a in enumerate(ba))
        B = sum(Yt[k, j] * b for j, b in enumerate(bb))
        out.append((A, B, float(s[k])))
    return out


def symmetric_diagonalize(H0, dims=None, tol: float = RECON_TOL):
    """Diagonal form ``sum_i w_i A_i (x) A_i`` of a swap-symmetric coupling.

    The ``w_i`` are the non-zero eigenvalues of the (symmetric) coefficient
    matrix in non-increasing order.
    """
    H, (d1, d2) = _coerce_hamiltonian(H0, dims)
    if d1 != d2:
        raise ValueError("symmetric decomposition needs equal local dimensions")
    S = swap_operator(d1)
    residual = np.max(np.abs(S @ H @ S - H))
    if residual > tol * max(1.0, np.max(np.abs(H))):
        raise ValueError(f"Hamiltonian is not swap-symmetric (residual {residual:.3g})")
    cm = coefficient_matrix(H, (d1, d2))
    Csym = 0.5 * (cm.C + cm.C.T)
    evals, evecs = np.linalg.eigh(Csym)
    order = np.argsort(-evals, kind="stable")
    scale = max(1.0, np.max(np.abs(evals), initial=0.0))
    out = []
    for k in order:
        if abs(evals[k]) <= tol * scale:
            continue
        A = sum(evecs[i, k] * a for i, a in enumerate(cm.basis_a))
        out.append((A, float(evals[k])))
    return out


def schmidt_decompose(state: BipartiteState) -> tuple[LocalUnitary, np.ndarray]:
    """Schmidt decomposition ``psi = (V (x) W) sum_i sigma_i |ii>``.

    ``sigma`` is non-negative and sorted non-increasingly.  Column phases
    live in ``V``: the SVD ``M = V diag(sigma) W^T`` already has real
    non-negative ``sigma``, and ``W`` is taken as the transpose of the right
    singular factor.  In degenerate subspaces the returned gauge is whatever
    the SVD picks.
    """
    if not isinstance(state, BipartiteState):
        raise TypeError("expected a BipartiteState")
    M = state.amplitudes
    V, s, Wt = np.linalg.svd(M, full_matrices=True)
    order = np.argsort(-s, kind="stable")
    if np.any(order != np.arange(s.size)):
        s = s[order]
        V = np.concatenate([V[:, order], V[:, s.size:]], axis=1)
        Wt = np.concatenate([Wt[order], Wt[s.size:]], axis=0)
    return LocalUnitary(V, Wt.T), s


def diag_state(sigma, dims=None) -> BipartiteState:
    """The diagonal state ``sum_i sigma_i |ii>``."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    d1, d2 = dims if dims is not None else (n, n)
    M = np.zeros((d1, d2), dtype=complex)
    M[np.arange(n), np.arange(n)] = sigma
    return BipartiteState((d1, d2), M)


def rotation_from_su2(V) -> np.ndarray:
    """Rotation ``R_V`` with ``V (a.P) V^* = (R_V a).P``.

    ``(R_V)_ij = tr(P_i V P_j V^*) / 2``; any global phase of ``V`` drops out.
    """
    V = np.asarray(V, dtype=complex)
    if V.shape != (2, 2) or not is_unitary(V):
        raise ValueError("rotation_from_su2 needs a 2x2 unitary")
    Vd = V.conj().T
    return np.array(
        [[0.5 * np.trace(Pi @ V @ Pj @ Vd).real for Pj in PAULI] for Pi in PAULI]
    )


def su2_from_rotation(R) -> np.ndarray:
    """An ``SU(2)`` element ``V`` with ``rotation_from_su2(V) == R``."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
        raise ValueError("expected a 3x3 orthogonal matrix")
    if np.linalg.det(R) < 0:
        raise ValueError("reflections are not in the image of SU(2)")
    rotvec = Rotation.from_matrix(R).as_rotvec()
    theta = np.linalg.norm(rotvec)
    if theta == 0.0:
        return np.eye(2, dtype=complex)
    n = rotvec / theta
    nP = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * nP


def frame_for(A, target) -> np.ndarray:
    """Unitary ``V`` with ``V^* A V = target``.

    Both matrices must be Hermitian with the same spectrum.
    """
    A = np.asarray(A, dtype=complex)
    target = np.asarray(target, dtype=complex)
    la, Qa = np.linalg.eigh(A)
    lt, Qt = np.linalg.eigh(target)
    if np.max(np.abs(la - lt)) > 1e-9 * max(1.0, np.max(np.abs(la))):
        raise ValueError("matrices do not share a spectrum")
    return Qa @ Qt.conj().T


def haar_unitary(d: int, rng=None) -> np.ndarray:
    """Haar-random ``d x d`` unitary (QR with phase correction)."""
    rng = np.random.default_rng(rng)
    return haar_unitaries(1, d, rng)[0]


def haar_unitaries(n: int, d: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    Z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diagonal(R, axis1=1, axis2=2)
    ph = ph / np.abs(ph)
    return Q * ph[:, None, :]


def random_hermitian(d: int, rng=None, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(rng)
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (X + X.conj().T)


def random_state(dims: Sequence[int], rng=None) -> BipartiteState:
    rng = np.random.default_rng(rng)
    d1, d2 = dims
    v = rng.standard_normal(d1 * d2) + 1j * rng.standard_normal(d1 * d2)
    return BipartiteState.from_vector(v, (d1, d2), normalize=True)
