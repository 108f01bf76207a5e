"""Command-line entry point.

Every subcommand reads its parameters from built-in defaults, then an
optional ``--config`` JSON file, then command-line flags (flags win).  All
inputs are validated before any computation.  Invalid input exits with
code 2; a stabilisation check that misses its tolerance exits with 1.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from typing import Callable

import numpy as np

from . import __version__
from . import io as bio
from .compensation import (
    PoleError,
    check_stabilized,
    compensating_general,
    fermionic_diagonal_stabilizer,
    fermionic_state,
    qutrit_stabilizer,
    stabilizer_qubits_diagonal,
    stabilizer_qubits_product_safe,
)
from .core import (
    CouplingHamiltonian,
    coefficient_matrix,
    diag_state,
    diagonalize_coupling,
    schmidt_decompose,
)
from .pmp import synthesize_plan
from .reduced import weyl_project
from .simulation import (
    MODES,
    cost_C,
    epsilon_protocol,
    lift_two_qubit_protocol,
    schrodinger_integrate,
    sweep_cost,
    transformed_cost,
)
from .speed_limits import (
    brute_force_fermionic,
    brute_force_speed,
    default_jobs,
    fermionic_speed_bounds,
    pauli_coupling,
    qutrit_speed_limit,
    speed_limit_bosonic,
    speed_limit_two_qubits,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2
# targets typed with three decimals are renormalised rather than rejected
NORM_SLACK = 1e-2


class InputError(ValueError):
    """Invalid user input (reported with exit code 2)."""


# parameters ------------------------------------------------------------------


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    if not all(math.isfinite(v) for v in vals):
        raise InputError("non-finite number in list")
    return vals


def _merge(defaults: dict, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    params = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        params.update(cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    for key, val in params.items():
        if isinstance(val, float) and not math.isfinite(val):
            raise InputError(f"parameter {key} is not finite")
    return params


def _positive(params: dict, *keys) -> None:
    for k in keys:
        v = params[k]
        if v is None or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
            raise InputError(f"{k} must be a positive number, got {v!r}")


def _emit(params: dict, command: str, payload: dict, out: str | None = None) -> None:
    meta = bio.header(params.get("seed"), params, command)
    if out:
        bio.write_json(out, meta, payload)
    sys.stdout.write(bio.render_json(meta, payload))


def _emit_csv(params: dict, command: str, out: str, columns, rows) -> None:
    meta = bio.header(params.get("seed"), params, command)
    bio.write_csv(out, meta, columns, rows)


def _hamiltonian(source) -> CouplingHamiltonian:
    if source is None:
        raise InputError("a Hamiltonian is required (--hamiltonian)")
    return bio.load_hamiltonian(source)


def _sigma_columns(n: int) -> list[str]:
    return ["t"] + [f"sigma_{i + 1}" for i in range(n)]


# speed-limit -----------------------------------------------------------------

CASES = ("auto", "two-qubit", "bosonic", "qutrit", "fermionic")


def _single_term(H: CouplingHamiltonian):
    if len(H.terms) == 1:
        return H.terms[0]
    terms = diagonalize_coupling(H)
    if len(terms) != 1:
        raise InputError("this case needs a product coupling A (x) B")
    A, B, w = terms[0]
    return w * A, B


def speed_limit_report(H: CouplingHamiltonian, case: str, budget: int, seed: int, jobs: int) -> dict:
    """Closed-form speed limit next to a brute-force estimate."""
    if case not in CASES:
        raise InputError(f"unsupported case {case!r}")
    dims = H.dims
    if case == "auto":
        case = {(2, 2): "two-qubit", (3, 3): "qutrit"}.get(dims)
        if case is None:
            raise InputError(f"no automatic case for dims {dims}; pass --case")
    if case in ("two-qubit", "bosonic") and dims != (2, 2):
        raise InputError(f"case {case} needs dims (2, 2)")
    if case == "two-qubit":
        res = speed_limit_two_qubits(coefficient_matrix(H).C)
        bf = brute_force_speed(H, "abs", budget=budget, seed=seed, jobs=jobs)
    elif case == "bosonic":
        res = speed_limit_bosonic(coefficient_matrix(H).C)
        bf = brute_force_speed(H, "abs", budget=budget, seed=seed, symmetric=True, jobs=jobs)
    elif case == "qutrit":
        if dims != (3, 3):
            raise InputError("case qutrit needs dims (3, 3)")
        A, B = _single_term(H)
        res = qutrit_speed_limit(A, B)
        bf = brute_force_speed(H, "l1", budget=budget, seed=seed, jobs=jobs)
    else:
        if dims != (4, 4):
            raise InputError("case fermionic needs dims (4, 4)")
        A, B = _single_term(H)
        if np.max(np.abs(A - B)) > 1e-10:
            raise InputError("case fermionic needs a coupling A (x) A")
        eigs = np.sort(np.linalg.eigvalsh(A))[::-1]
        res = fermionic_speed_bounds(eigs)
        bf = brute_force_fermionic(A, budget=budget, seed=seed)
    return {
        "case": res.case if case != "two-qubit" else "two-qubit",
        "omega_star": res.omega_star,
        "bounds": list(res.bounds) if res.bounds is not None else [res.omega_star, res.omega_star],
        "brute_force": bf,
        "gap": res.omega_star - bf,
        "budget": budget,
        "seed": seed,
    }


def cmd_speed_limit(args) -> int:
    p = _merge({"hamiltonian": None, "case": "auto", "budget": 20000, "seed": 0}, args)
    H = _hamiltonian(p["hamiltonian"])
    if int(p["budget"]) <= 0:
        raise InputError("budget must be positive")
    report = speed_limit_report(H, p["case"], int(p["budget"]), int(p["seed"]), args.jobs)
    _emit(p, "speed-limit", report, args.out)
    return EXIT_OK


# plan ------------------------------------------------------------------------


def cmd_plan(args) -> int:
    p = _merge({"target": None, "hamiltonian": None, "omega_star": None, "dt": 1e-3, "seed": 0}, args)
    if p["target"] is None:
        raise InputError("a target is required (--target x,y,z)")
    tau = np.array(_floats(p["target"]))
    if tau.shape != (3,):
        raise InputError("the target needs three components")
    norm = np.linalg.norm(tau)
    if abs(norm - 1.0) > NORM_SLACK:
        raise InputError(f"the target must have unit norm, got {norm:.6g}")
    if abs(norm - 1.0) > 1e-12:
        warnings.warn(f"target renormalised from norm {norm:.12g}", stacklevel=1)
    tau = tau / norm
    proj = weyl_project(tau)
    if np.max(np.abs(proj - tau)) > 1e-12:
        warnings.warn(f"target projected into the Weyl chamber: {proj.tolist()}", stacklevel=1)
    if p["omega_star"] is not None:
        w = float(p["omega_star"])
    elif p["hamiltonian"] is not None:
        H = _hamiltonian(p["hamiltonian"])
        if H.dims != (3, 3):
            raise InputError("planning needs a qutrit coupling")
        w = qutrit_speed_limit(*_single_term(H)).omega_star
    else:
        raise InputError("pass --hamiltonian or --omega-star")
    _positive({"omega_star": w, "dt": p["dt"]}, "omega_star", "dt")
    plan = synthesize_plan(proj, omega_star=w)
    payload = plan.to_dict()
    payload["omega_star"] = w
    payload["endpoint_error"] = float(np.linalg.norm(plan.endpoint() - proj))
    if args.trajectory:
        traj = plan.trajectory(float(p["dt"]))
        rows = np.column_stack([traj.times, traj.states])
        _emit_csv(p, "plan", args.trajectory, _sigma_columns(3), rows)
    _emit(p, "plan", payload, args.out)
    return EXIT_OK


# lift / simulate -------------------------------------------------------------


def _result_rows(res):
    return np.column_stack([res.times, res.singular])


def _summary(res) -> dict:
    return {
        "duration": float(res.times[-1]),
        "final_singular_values": res.final_singular.tolist(),
        "norm_error": res.norm_error(),
        "steps": int(res.times.size - 1),
    }


def cmd_lift(args) -> int:
    p = _merge(
        {"case": "two-qubit", "coupling": None, "reverse": False, "epsilon": 0.05,
         "mode": "time-dependent", "dt": 1e-3, "seed": 0},
        args,
    )
    _positive(p, "dt")
    if p["case"] == "two-qubit":
        H = _hamiltonian(p["coupling"])
        res = lift_two_qubit_protocol(H, reverse=bool(p["reverse"]), dt=float(p["dt"]))
    elif p["case"] == "qutrit":
        if p["mode"] not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        res = epsilon_protocol(float(p["epsilon"]), p["mode"], dt=float(p["dt"]))
    else:
        raise InputError(f"unsupported lift case {p['case']!r}")
    if args.out:
        _emit_csv(p, "lift", args.out, _sigma_columns(res.singular.shape[1]), _result_rows(res))
    _emit(p, "lift", _summary(res), None)
    return EXIT_OK


def cmd_simulate(args) -> int:
    """``protocol = "epsilon"`` runs the detour; ``"hamiltonian"`` a constant one."""
    p = _merge(
        {"protocol": "epsilon", "epsilon": 0.05, "mode": "time-dependent", "T": None,
         "dt": 1e-3, "hamiltonian": None, "state": None, "compensate": False, "seed": 0},
        args,
    )
    _positive(p, "dt")
    if p["T"] is not None:
        _positive(p, "T")
    if p["protocol"] == "epsilon":
        if p["mode"] not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        res = epsilon_protocol(float(p["epsilon"]), p["mode"], T=p["T"], dt=float(p["dt"]))
    elif p["protocol"] == "hamiltonian":
        H = _hamiltonian(p["hamiltonian"])
        if p["state"] is None:
            raise InputError("protocol 'hamiltonian' needs a state")
        psi = bio.load_state(p["state"])
        if psi.dims != H.dims:
            raise InputError("state and Hamiltonian dims differ")
        if p["T"] is None:
            raise InputError("protocol 'hamiltonian' needs T")
        payload = [H]
        if p["compensate"]:
            payload.append(compensating_general(psi, H))
        res = schrodinger_integrate(psi, payload, float(p["T"]), float(p["dt"]))
    else:
        raise InputError(f"unknown protocol {p['protocol']!r}")
    if args.out:
        _emit_csv(p, "simulate", args.out, _sigma_columns(res.singular.shape[1]), _result_rows(res))
    _emit(p, "simulate", _summary(res), None)
    return EXIT_OK


# epsilon sweeps --------------------------------------------------------------


def cmd_sweep(args) -> int:
    p = _merge({"min": 0.005, "max": 0.2, "n": 200, "include": None, "seed": 0}, args)
    _positive(p, "min", "max", "n")
    if not p["min"] < p["max"] < 1.0:
        raise InputError("need 0 < min < max < 1")
    include = _floats(p["include"]) if p["include"] is not None else []
    if any(not 0.0 < e < 1.0 for e in include):
        raise InputError("included epsilons must lie in (0, 1)")
    curve = sweep_cost(float(p["min"]), float(p["max"]), int(p["n"]), include, jobs=args.jobs)
    rows = np.column_stack([curve.epsilons, curve.costs, curve.xs, curve.transformed])
    columns = ["epsilon", "cost", "x", "cost_transformed"]
    if args.out:
        _emit_csv(p, "sweep-eps", args.out, columns, rows)
    else:
        sys.stdout.write(bio.render_csv(bio.header(p["seed"], p, "sweep-eps"), columns, rows))
    return EXIT_OK


def cmd_cost(args) -> int:
    p = _merge({"epsilon": None, "seed": 0}, args)
    if p["epsilon"] is None:
        raise InputError("--epsilon is required")
    eps = float(p["epsilon"])
    if not 0.0 < eps < 1.0:
        raise InputError("epsilon must lie in (0, 1)")
    x = 1.0 / (2.0 * math.sqrt(2.0) * eps)
    payload = {"epsilon": eps, "cost": cost_C(eps), "x": x}
    payload["cost_transformed"] = transformed_cost(x) if x > 1.0 / (2.0 * math.sqrt(2.0)) else None
    _emit(p, "cost", payload, args.out)
    return EXIT_OK


# stabilize -------------------------------------------------------------------

STAB_CASES = ("qutrit", "qubits-diagonal", "qubits-product-safe", "fermionic")
_DEFAULT_C = {
    "qubits-diagonal": [[1.0, 0, 0], [0, 0.6, 0], [0, 0, 0.3]],
    "qubits-product-safe": [[1.0, 0, 0], [0, 1.0, 0.4], [0, -0.2, 0.3]],
}


def _stabilize_setup(case: str, chi: float, C, eigs):
    if case == "qutrit":
        D = np.diag([1.0, 0.0, -1.0]).astype(complex)
        H0 = CouplingHamiltonian(((D, D),))
        return diag_state(np.ones(3) / np.sqrt(3.0)), H0, qutrit_stabilizer(), "maximally entangled"
    if case.startswith("qubits"):
        C = np.asarray(_DEFAULT_C[case] if C is None else C, dtype=float).reshape(3, 3)
        H0 = pauli_coupling(C)
        make = stabilizer_qubits_diagonal if case == "qubits-diagonal" else stabilizer_qubits_product_safe
        psi = diag_state([np.cos(chi), np.sin(chi)])
        return psi, H0, make(C, chi), chi
    eigs = np.asarray([1.0, 0.5, -0.25, -1.0] if eigs is None else eigs, dtype=float)
    if eigs.shape != (4,):
        raise InputError("fermionic case needs four eigenvalues")
    A = np.diag(eigs).astype(complex)
    H0 = CouplingHamiltonian(((A, A),))
    return fermionic_state(chi), H0, fermionic_diagonal_stabilizer(eigs), chi


def cmd_stabilize(args) -> int:
    p = _merge(
        {"case": "qutrit", "chi": math.pi / 8, "T": None, "tol": None,
         "coefficients": None, "eigs": None, "seed": 0},
        args,
    )
    case = p["case"]
    if case not in STAB_CASES:
        raise InputError(f"case must be one of {STAB_CASES}")
    T = float(p["T"] if p["T"] is not None else (20.0 if case == "qutrit" else 10.0))
    tol = float(p["tol"] if p["tol"] is not None else (1e-8 if case == "qutrit" else 1e-6))
    _positive({"T": T, "tol": tol}, "T", "tol")
    C = _floats(p["coefficients"]) if p["coefficients"] is not None else None
    if C is not None and len(C) != 9:
        raise InputError("coefficients need nine numbers (row-major 3x3)")
    eigs = _floats(p["eigs"]) if p["eigs"] is not None else None
    psi, H0, Hc, label = _stabilize_setup(case, float(p["chi"]), C, eigs)
    report = check_stabilized(psi, H0, Hc, T, tol=tol, case=case, label=label)
    _emit(p, "stabilize", report.to_dict(), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


# decompose -------------------------------------------------------------------


def cmd_decompose(args) -> int:
    p = _merge({"hamiltonian": None, "state": None, "seed": 0}, args)
    if p["hamiltonian"] is None and p["state"] is None:
        raise InputError("pass --hamiltonian and/or --state")
    H = _hamiltonian(p["hamiltonian"]) if p["hamiltonian"] is not None else None
    psi = bio.load_state(p["state"], normalize=True) if p["state"] is not None else None
    payload: dict = {}
    if H is not None:
        cm = coefficient_matrix(H)
        payload["hamiltonian"] = {
            "dims": list(H.dims),
            "C": cm.C,
            "E_loc": bio.complex_to_json(cm.E_loc),
            "F_loc": bio.complex_to_json(cm.F_loc),
            "trace": cm.trace,
            "coupling_singular_values": np.linalg.svd(cm.C, compute_uv=False),
            "swap_residual": H.swap_residual(),
            "rank": len(diagonalize_coupling(H)),
        }
    if psi is not None:
        U, sigma = schmidt_decompose(psi)
        payload["state"] = {
            "dims": list(psi.dims),
            "schmidt_coefficients": sigma,
            "weyl_projected": weyl_project(sigma),
            "V": bio.complex_to_json(U.V),
            "W": bio.complex_to_json(U.W),
        }
    _emit(p, "decompose", payload, args.out)
    return EXIT_OK


# parser ----------------------------------------------------------------------


def _jobs(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("jobs must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bipartite-control", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameters (flags take precedence)")
    common.add_argument("--seed", type=int, help="seed for stochastic oracles (default 0)")
    common.add_argument("--jobs", type=_jobs, default=None,
                        help="worker processes (default: $BIPARTITE_JOBS or 1)")
    common.add_argument("--out", help="output file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, fn: Callable, help_: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("speed-limit", cmd_speed_limit, "closed-form speed limit and brute-force check")
    sp.add_argument("--hamiltonian", help="Hamiltonian JSON")
    sp.add_argument("--case", choices=CASES)
    sp.add_argument("--budget", type=int)

    sp = add("plan", cmd_plan, "time-optimal qutrit plan from the north pole")
    sp.add_argument("--target", help="target Schmidt vector x,y,z")
    sp.add_argument("--hamiltonian", help="qutrit coupling JSON (sets the time scale)")
    sp.add_argument("--omega-star", dest="omega_star", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--trajectory", help="CSV for the reduced trajectory")

    sp = add("lift", cmd_lift, "run a lifted protocol in the full system")
    sp.add_argument("--case", choices=("two-qubit", "qutrit"))
    sp.add_argument("--coupling", help="two-qubit Hamiltonian JSON")
    sp.add_argument("--reverse", action="store_const", const=True, default=None)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--dt", type=float)

    sp = add("simulate", cmd_simulate, "Schrödinger simulation from a config")
    sp.add_argument("--protocol", choices=("epsilon", "hamiltonian"))
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--T", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--hamiltonian")
    sp.add_argument("--state")
    sp.add_argument("--compensate", action="store_const", const=True, default=None)

    sp = add("sweep-eps", cmd_sweep, "tabulate the detour cost over epsilon")
    sp.add_argument("--min", type=float)
    sp.add_argument("--max", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--include", help="extra epsilons, comma separated")

    sp = add("cost", cmd_cost, "detour cost for one epsilon")
    sp.add_argument("--epsilon", type=float)

    sp = add("stabilize", cmd_stabilize, "check a stabilising Hamiltonian")
    sp.add_argument("--case", choices=STAB_CASES)
    sp.add_argument("--chi", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--coefficients", help="frame coupling C', nine numbers row-major")
    sp.add_argument("--eigs", help="fermionic one-particle eigenvalues")

    sp = add("decompose", cmd_decompose, "coefficient matrix and Schmidt decomposition")
    sp.add_argument("--hamiltonian")
    sp.add_argument("--state")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs is None:
        args.jobs = default_jobs()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda m, *a, **k: print(f"warning: {m}", file=sys.stderr)
            return args.func(args)
    except (InputError, PoleError, FileNotFoundError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
