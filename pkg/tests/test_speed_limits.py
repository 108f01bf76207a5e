import numpy as np
import pytest

from bipartite_control.core import CouplingHamiltonian, LocalUnitary, coefficient_matrix
from bipartite_control.reduced import induced_field
from bipartite_control.speed_limits import (
    brute_force_fermionic,
    brute_force_speed,
    fermionic_achiever,
    fermionic_speed_bounds,
    fermionic_velocity,
    octahedron_faces,
    pauli_coupling,
    qutrit_speed_limit,
    qutrit_vertex_frame,
    speed_limit_bosonic,
    speed_limit_two_qubits,
)
from oracles import haar, pauli_dense

D3 = np.diag([1.0, 0.0, -1.0])


def test_two_qubit_examples():
    assert np.isclose(speed_limit_two_qubits(np.eye(3)).omega_star, 2)
    assert speed_limit_two_qubits(np.zeros((3, 3))).omega_star == 0


def test_two_qubit_achiever(rng):
    for _ in range(20):
        C = rng.normal(size=(3, 3))
        res = speed_limit_two_qubits(C)
        s = np.linalg.svd(C, compute_uv=False)
        assert np.isclose(res.omega_star, s[0] + s[1])
        w = induced_field(pauli_coupling(C), res.achiever).angular_velocity
        assert abs(abs(w) - res.omega_star) < 1e-9


def test_two_qubit_invariant_under_local_change(rng):
    C = rng.normal(size=(3, 3))
    H = CouplingHamiltonian.from_dense(pauli_dense(C), (2, 2))
    U = LocalUnitary(haar(2, rng), haar(2, rng))
    C2 = coefficient_matrix(H.conjugated(U)).C
    assert np.isclose(speed_limit_two_qubits(C2).omega_star, speed_limit_two_qubits(C).omega_star, atol=1e-10)


def test_two_qubit_brute_force_tight(rng):
    C = np.diag([1.0, 1.0, 0.0])
    assert abs(brute_force_speed(pauli_coupling(C), budget=4000) - 2) < 1e-3


def test_achievable_interval_symmetric(rng):
    C = rng.normal(size=(3, 3))
    H = pauli_coupling(C)
    hi = brute_force_speed(H, "signed", budget=4000, seed=1)
    lo = brute_force_speed(H, "negated", budget=4000, seed=2)
    assert abs(hi - lo) < 1e-6


def test_bosonic_examples(rng):
    assert np.isclose(speed_limit_bosonic(np.diag([1, 0, -1])).omega_star, 2)
    assert np.isclose(speed_limit_bosonic(np.eye(3)).omega_star, 0)
    with pytest.raises(ValueError):
        speed_limit_bosonic(np.triu(np.ones((3, 3))))
    X = rng.normal(size=(3, 3))
    C = X + X.T
    res = speed_limit_bosonic(C)
    assert np.allclose(res.achiever.V, res.achiever.W)
    w = induced_field(pauli_coupling(C), res.achiever).angular_velocity
    assert abs(abs(w) - res.omega_star) < 1e-9
    bf = brute_force_speed(pauli_coupling(C), budget=4000, symmetric=True)
    assert res.omega_star - 1e-3 <= bf <= res.omega_star + 1e-9


def test_fermionic_bounds():
    r = fermionic_speed_bounds([1, 1, -1, -1])
    assert np.allclose(r.bounds, [1, 1])
    r = fermionic_speed_bounds([1, 0, 0, 0])
    assert np.allclose(r.bounds, [0, 1 / 16])
    r = fermionic_speed_bounds([3, 2, 1, 0])
    assert np.allclose(r.bounds, [1, 1])
    with pytest.raises(ValueError):
        fermionic_speed_bounds([0, 1, 2, 3])


def test_fermionic_achiever_and_brute_force():
    for eigs in ([3, 2, 0.5, -1], [1, 1, -1, -1]):
        lower = fermionic_speed_bounds(eigs).omega_star
        v = fermionic_velocity(np.diag(eigs), fermionic_achiever(eigs))
        assert abs(abs(v) - lower) < 1e-12
    assert brute_force_fermionic(np.diag([1.0, 0, 0, 0]), budget=2000, iterations=100) < 1e-12


def test_qutrit_speed_limit():
    assert np.isclose(qutrit_speed_limit(D3, D3).omega_star, 1)
    assert np.isclose(qutrit_speed_limit(2 * D3, D3).omega_star, 2)
    with pytest.raises(ValueError):
        qutrit_speed_limit(np.diag([2.0, 0, -1]), D3)


def test_qutrit_vertices(rng):
    V = haar(3, rng)
    A = V @ D3 @ V.conj().T
    res = qutrit_speed_limit(A, D3)
    H0 = CouplingHamiltonian(((A, D3),))
    for key, U in res.achiever.items():
        w = induced_field(H0, U).omega
        axis = "xyz".index(key[1])
        sign = 1 if key[0] == "+" else -1
        expected = np.zeros(3)
        expected[axis] = sign
        assert np.allclose(w, expected, atol=1e-9), key
    U = qutrit_vertex_frame(A, D3, 2, -1.0)
    assert np.allclose(induced_field(H0, U).omega, [0, 0, -1], atol=1e-9)


def test_qutrit_brute_force_valid():
    H0 = CouplingHamiltonian(((D3, D3),))
    bf = brute_force_speed(H0, "l1", budget=4000)
    assert 1 - 1e-2 <= bf <= 1 + 1e-9


def test_octahedron_catalog():
    f = octahedron_faces()
    assert len(f["vertices"]) == 6 and len(f["edges"]) == 12 and len(f["facets"]) == 8
    for group in f.values():
        assert np.allclose(np.abs(group).sum(axis=1), 1)
    cube = 3 * f["facets"]
    assert np.allclose(np.abs(cube), 1)
    assert len({tuple(v) for v in cube}) == 8


def test_brute_force_basics(rng):
    zero = pauli_coupling(np.zeros((3, 3)))
    assert brute_force_speed(zero, budget=100, restarts=1, iterations=10) == 0
    with pytest.raises(ValueError):
        brute_force_speed(zero, budget=0)
    C = rng.normal(size=(3, 3))
    a = brute_force_speed(pauli_coupling(C), budget=3000, seed=5, jobs=1)
    b = brute_force_speed(pauli_coupling(C), budget=3000, seed=5, jobs=2)
    assert a == b


def test_scaling_equivariance(rng):
    C = rng.normal(size=(3, 3))
    lam = 2.5
    assert np.isclose(speed_limit_two_qubits(lam * C).omega_star, lam * speed_limit_two_qubits(C).omega_star)
    a = brute_force_speed(pauli_coupling(C), budget=1000, seed=3, iterations=50)
    b = brute_force_speed(pauli_coupling(lam * C), budget=1000, seed=3, iterations=50)
    assert np.isclose(b, lam * a, rtol=1e-10)
