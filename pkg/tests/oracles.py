"""Independent reference computations used by the tests.

Nothing here calls into the package's integrators or closed forms; the
oracles go through scipy's ``expm`` / ``solve_ivp`` and plain SVDs.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PX, PY, PZ)


def haar(d, rng):
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def rand_herm(d, rng):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (X + X.conj().T) / 2


def rand_state(d1, d2, rng):
    v = rng.normal(size=d1 * d2) + 1j * rng.normal(size=d1 * d2)
    return v / np.linalg.norm(v)


def svals(vec, dims):
    return np.linalg.svd(np.asarray(vec).reshape(dims), compute_uv=False)


def pauli_dense(C):
    return sum(C[i, j] * np.kron(PAULIS[i], PAULIS[j]) for i in range(3) for j in range(3))


def fd_sv_velocity(vec, H, dims, h=1e-6):
    """Central finite difference of sorted singular values under exp(-iHt)."""
    plus = svals(expm(-1j * h * H) @ vec, dims)
    minus = svals(expm(1j * h * H) @ vec, dims)
    return (plus - minus) / (2 * h)


def evolve(vec, H, t):
    return expm(-1j * t * H) @ vec


def ode_evolve(vec, Hfun, T, rtol=1e-11, atol=1e-12):
    """Schrödinger evolution with a general-purpose adaptive RK solver."""
    sol = solve_ivp(lambda t, y: -1j * (Hfun(t) @ y), (0.0, T), np.asarray(vec, dtype=complex),
                    method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1]


def rotation_matrix(V):
    """(R_V)_ij = tr(P_i V P_j V^*) / 2."""
    return np.array([[np.trace(PAULIS[i] @ V @ PAULIS[j] @ V.conj().T).real / 2 for j in range(3)]
                     for i in range(3)])


def adjoint_switch_times(l0, T):
    """Dominance-change instants of l' = u x l with vertex controls.

    Uses an adaptive ODE solver with event detection: the control is the
    signed unit vector on the dominant component and an event fires when a
    second component reaches the same magnitude.
    """
    l = np.asarray(l0, dtype=float)
    t, times = 0.0, []
    i = int(np.argmax(np.abs(l)))
    while t < T:
        u = np.zeros(3)
        u[i] = np.sign(l[i])
        others = [j for j in range(3) if j != i]
        events = []
        for j in others:
            def ev(_t, y, j=j, i=i):
                return abs(y[i]) - abs(y[j])
            ev.terminal = True
            ev.direction = -1
            events.append(ev)
        sol = solve_ivp(lambda _t, y: np.cross(u, y), (t, T), l, events=events,
                        rtol=1e-12, atol=1e-13, method="DOP853")
        if sol.status != 1:
            break
        t = float(sol.t[-1])
        l = sol.y[:, -1]
        times.append(t)
        j = next(k for k, e in enumerate(sol.t_events) if len(e))
        i = others[j]
    return np.array(times)
