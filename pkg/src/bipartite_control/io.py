"""File formats: Hamiltonians, states, schedules, CSV and JSON outputs.

Complex matrices are stored row-major as nested lists of ``[re, im]``
pairs.  Every output file starts with a header carrying the package
version, the seed and a hash of the effective configuration; the
timestamp sits on a line of its own so that outputs can be compared with
that line removed.  Writes are atomic (temporary file plus rename), so a
failed run never leaves partial output behind.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .core import BipartiteState, CouplingHamiltonian

__all__ = [
    "FLOAT_FORMAT",
    "fmt",
    "complex_to_json",
    "complex_from_json",
    "hamiltonian_to_dict",
    "hamiltonian_from_dict",
    "load_hamiltonian",
    "state_to_dict",
    "state_from_dict",
    "load_state",
    "load_schedule",
    "config_hash",
    "header",
    "write_csv",
    "write_json",
    "clean_floats",
]

FLOAT_FORMAT = ".12g"


def fmt(x: float) -> str:
    """Locale-independent 12-significant-digit float formatting."""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, FLOAT_FORMAT)


def complex_to_json(M) -> list:
    M = np.asarray(M, dtype=complex)
    return np.stack([M.real, M.imag], axis=-1).tolist()


def complex_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite entry in complex array")
    return arr[..., 0] + 1j * arr[..., 1]


def _read_json(source) -> Any:
    if isinstance(source, (dict, list)):
        return source
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open() as fh:
        return json.load(fh)


def hamiltonian_to_dict(H: CouplingHamiltonian) -> dict:
    return {
        "dims": list(H.dims),
        "terms": [{"A": complex_to_json(A), "B": complex_to_json(B)} for A, B in H.terms],
    }


def hamiltonian_from_dict(data: dict) -> CouplingHamiltonian:
    """Parse ``{dims, terms: [{A, B}, ...]}`` and check the declared dims."""
    if not isinstance(data, dict) or "terms" not in data:
        raise ValueError("Hamiltonian JSON needs a 'terms' list")
    terms = [(complex_from_json(t["A"]), complex_from_json(t["B"])) for t in data["terms"]]
    if not terms:
        raise ValueError("Hamiltonian JSON has no terms")
    H = CouplingHamiltonian(tuple(terms))
    if "dims" in data and tuple(int(d) for d in data["dims"]) != H.dims:
        raise ValueError(f"declared dims {data['dims']} do not match the terms {H.dims}")
    return H


def load_hamiltonian(source) -> CouplingHamiltonian:
    return hamiltonian_from_dict(_read_json(source))


def state_to_dict(psi: BipartiteState) -> dict:
    return {"dims": list(psi.dims), "amplitudes": complex_to_json(psi.vector)}


def state_from_dict(data: dict, normalize: bool = False) -> BipartiteState:
    """Parse ``{dims, amplitudes}``; amplitudes may be flat or a matrix."""
    if not isinstance(data, dict) or "dims" not in data or "amplitudes" not in data:
        raise ValueError("state JSON needs 'dims' and 'amplitudes'")
    dims = tuple(int(d) for d in data["dims"])
    vec = complex_from_json(data["amplitudes"]).reshape(-1)
    return BipartiteState.from_vector(vec, dims, normalize=normalize)


def load_state(source, normalize: bool = False) -> BipartiteState:
    return state_from_dict(_read_json(source), normalize)


def load_schedule(source) -> list[tuple[float, float, np.ndarray]]:
    """Reduced control segments from a JSON list.

    Each entry is ``{"t0", "t1", "omega"}`` or ``{"duration", "omega"}``;
    duration-only entries follow the previous segment.
    """
    data = _read_json(source)
    if not isinstance(data, list):
        raise ValueError("schedule JSON must be a list of segments")
    out, t = [], 0.0
    for seg in data:
        omega = np.asarray(seg["omega"], dtype=float)
        if "duration" in seg:
            t0 = float(seg.get("t0", t))
            t1 = t0 + float(seg["duration"])
        else:
            t0, t1 = float(seg["t0"]), float(seg["t1"])
        if not (np.isfinite(t0) and np.isfinite(t1) and np.all(np.isfinite(omega))):
            raise ValueError("non-finite value in schedule")
        out.append((t0, t1, omega))
        t = t1
    return out


def clean_floats(obj):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(obj, dict):
        return {k: clean_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_floats(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not np.isfinite(x) else float(fmt(x))
    return obj


def config_hash(config: dict) -> str:
    blob = json.dumps(clean_floats(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header(seed, config: dict, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config_hash": config_hash(config),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(meta: dict, columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    lines = [f"# {k}: {meta[k]}" for k in ("command", "version", "seed", "config_hash")]
    lines.append(f"# timestamp: {meta['timestamp']}")
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_json(meta: dict, payload: dict) -> str:
    doc = {"meta": meta, **clean_floats(payload)}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_csv(path, meta: dict, columns: Sequence[str], rows) -> None:
    """Write a commented header block, a column line and formatted rows."""
    _atomic_write(path, render_csv(meta, columns, rows))


def write_json(path, meta: dict, payload: dict) -> None:
    """Write ``payload`` with a ``meta`` block; one key per line."""
    _atomic_write(path, render_json(meta, payload))
