import json
import subprocess
import sys

import numpy as np
import pytest

from bipartite_control import io as bio
from bipartite_control.cli import main
from bipartite_control.core import CouplingHamiltonian, random_state
from oracles import PX, PY, PZ, rand_herm

D3 = np.diag([1.0, 0.0, -1.0])


def write_h(path, terms):
    path.write_text(json.dumps(bio.hamiltonian_to_dict(CouplingHamiltonian(tuple(terms)))))
    return str(path)


def strip_timestamp(text):
    return "\n".join(line for line in text.splitlines() if "timestamp" not in line)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def body(out):
    return json.loads(out)


def test_complex_round_trip(rng):
    M = rand_herm(3, rng)
    assert np.allclose(bio.complex_from_json(bio.complex_to_json(M)), M)
    with pytest.raises(ValueError):
        bio.complex_from_json([[1.0, 2.0, 3.0]])


def test_hamiltonian_and_state_round_trip(rng):
    H = CouplingHamiltonian(((rand_herm(2, rng), rand_herm(3, rng)),))
    H2 = bio.hamiltonian_from_dict(json.loads(json.dumps(bio.hamiltonian_to_dict(H))))
    assert np.allclose(H2.dense, H.dense)
    bad = bio.hamiltonian_to_dict(H)
    bad["dims"] = [3, 3]
    with pytest.raises(ValueError):
        bio.hamiltonian_from_dict(bad)
    psi = random_state((2, 3), rng)
    assert np.allclose(bio.state_from_dict(bio.state_to_dict(psi)).vector, psi.vector)


def test_schedule_loader():
    segs = bio.load_schedule([{"duration": 1.0, "omega": [1, 0, 0]}, {"duration": 0.5, "omega": [0, 1, 0]}])
    assert segs[1][0] == 1.0 and segs[1][1] == 1.5
    with pytest.raises(ValueError):
        bio.load_schedule({"omega": 1})


def test_fmt():
    assert bio.fmt(1 / 3) == "0.333333333333"
    assert bio.fmt(0.0) == "0"


def test_speed_limit_cli(tmp_path, capsys):
    h = write_h(tmp_path / "ising.json", [(PZ, PZ)])
    code, out, _ = run(["speed-limit", "--hamiltonian", h, "--budget", "2000"], capsys)
    assert code == 0
    rep = body(out)
    assert rep["omega_star"] == 1.0 and abs(rep["gap"]) < 1e-6
    assert {"case", "omega_star", "bounds", "brute_force", "gap", "budget", "seed"} <= set(rep)
    h0 = write_h(tmp_path / "zero.json", [(0 * PZ, PZ)])
    code, out, _ = run(["speed-limit", "--hamiltonian", h0, "--budget", "500"], capsys)
    assert body(out)["omega_star"] == 0
    hq = write_h(tmp_path / "q.json", [(D3, D3)])
    code, out, _ = run(["speed-limit", "--hamiltonian", hq, "--budget", "2000"], capsys)
    assert body(out)["omega_star"] == 1.0


def test_speed_limit_unsupported(tmp_path, capsys):
    h = write_h(tmp_path / "h.json", [(np.diag([2.0, 0, -1]), D3)])
    code, _, err = run(["speed-limit", "--hamiltonian", h, "--budget", "100"], capsys)
    assert code == 2 and "equidistant" in err
    h = write_h(tmp_path / "h24.json", [(PX, np.eye(4))])
    code, _, _ = run(["speed-limit", "--hamiltonian", h], capsys)
    assert code == 2


def test_plan_cli(tmp_path, capsys):
    out_json, traj = tmp_path / "plan.json", tmp_path / "traj.csv"
    code, out, err = run(["plan", "--target", "0.577,0.577,0.577", "--omega-star", "2",
                          "--out", str(out_json), "--trajectory", str(traj)], capsys)
    assert code == 0
    plan = json.loads(out_json.read_text())
    assert abs(plan["total_time"] - 1.35102 / 2) < 1e-5
    assert plan["endpoint_error"] < 1e-8
    lines = traj.read_text().splitlines()
    assert lines[5] == "t,sigma_1,sigma_2,sigma_3"
    code, out, _ = run(["plan", "--target", "0,0,1", "--omega-star", "1"], capsys)
    assert code == 0 and body(out)["segments"] == []
    code, out, err = run(["plan", "--target", "0.8,0,-0.6", "--omega-star", "1"], capsys)
    assert code == 0 and "projected" in err
    code, _, err = run(["plan", "--target", "0.6,0,0.8"], capsys)
    assert code == 2


def test_lift_cli(tmp_path, capsys):
    h = write_h(tmp_path / "ising.json", [(PZ, PZ)])
    out = tmp_path / "lift.csv"
    code, stdout, _ = run(["lift", "--case", "two-qubit", "--coupling", h, "--out", str(out)], capsys)
    assert code == 0
    assert np.allclose(body(stdout)["final_singular_values"], [2**-0.5] * 2, atol=1e-6)
    last = out.read_text().strip().splitlines()[-1].split(",")
    assert np.allclose([float(v) for v in last[1:]], [2**-0.5] * 2, atol=1e-6)


def test_simulate_config_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"protocol": "epsilon", "epsilon": 0.12, "mode": "constant"}))
    code, out, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 0
    sv = np.sort(body(out)["final_singular_values"])
    assert abs(np.linalg.norm(sv - 1 / np.sqrt(3)) - 0.1404) < 1e-3
    code, out2, _ = run(["simulate", "--config", str(cfg), "--epsilon", "0.0506"], capsys)
    sv = np.sort(body(out2)["final_singular_values"])
    assert abs(np.linalg.norm(sv - 1 / np.sqrt(3)) - 0.0214) < 1e-3
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 2


def test_simulate_hamiltonian_protocol(tmp_path, capsys, rng):
    h = write_h(tmp_path / "h.json", [(PX, PX), (PY, PZ)])
    s = tmp_path / "s.json"
    s.write_text(json.dumps(bio.state_to_dict(random_state((2, 2), rng))))
    code, out, _ = run(["simulate", "--protocol", "hamiltonian", "--hamiltonian", h, "--state", str(s),
                        "--T", "0.5", "--dt", "0.01"], capsys)
    assert code == 0 and body(out)["norm_error"] < 1e-9


def test_cost_cli(capsys):
    code, out, _ = run(["cost", "--epsilon", "0.0276"], capsys)
    assert code == 0 and abs(body(out)["cost"] - 0.0436) <= 0.003
    code, _, _ = run(["cost", "--epsilon", "1.2"], capsys)
    assert code == 2


def test_stabilize_cli(capsys):
    code, out, _ = run(["stabilize", "--case", "qutrit"], capsys)
    rep = body(out)
    assert code == 0 and rep["pass"] and rep["max_drift"] < 1e-8
    for case in ("qubits-diagonal", "qubits-product-safe", "fermionic"):
        code, out, _ = run(["stabilize", "--case", case], capsys)
        assert code == 0, case
    code, _, _ = run(["stabilize", "--case", "qubits-product-safe", "--chi", str(np.pi / 4)], capsys)
    assert code == 2


def test_decompose_cli(tmp_path, capsys, rng):
    h = write_h(tmp_path / "h.json", [(PZ, PZ)])
    s = tmp_path / "s.json"
    s.write_text(json.dumps(bio.state_to_dict(random_state((2, 3), rng))))
    code, out, _ = run(["decompose", "--hamiltonian", h, "--state", str(s)], capsys)
    rep = body(out)
    assert code == 0 and rep["hamiltonian"]["rank"] == 1
    assert np.isclose(np.linalg.norm(rep["state"]["schmidt_coefficients"]), 1)


def test_sweep_deterministic_and_atomic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep-eps", "--min", "0.01", "--max", "0.2", "--n", "6", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert strip_timestamp(a.read_text()) == strip_timestamp(b.read_text())
    assert "# seed: 3" in a.read_text()
    # invalid input leaves no file behind
    c = tmp_path / "c.csv"
    assert main(["sweep-eps", "--min", "0.3", "--max", "0.2", "--n", "6", "--out", str(c)]) == 2
    assert not c.exists()
    assert list(tmp_path.glob(".*tmp")) == []
    capsys.readouterr()


def test_json_outputs_deterministic(tmp_path, capsys):
    h = write_h(tmp_path / "ising.json", [(PZ, PZ)])
    outs = []
    for name in ("r1.json", "r2.json"):
        p = tmp_path / name
        main(["speed-limit", "--hamiltonian", h, "--budget", "1000", "--seed", "7", "--out", str(p)])
        outs.append(strip_timestamp(p.read_text()))
    assert outs[0] == outs[1]
    capsys.readouterr()


def test_missing_file_exit_code(capsys):
    code, _, err = run(["speed-limit", "--hamiltonian", "/nonexistent.json"], capsys)
    assert code == 2 and "no such file" in err


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "bipartite_control.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
