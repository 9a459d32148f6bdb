"""CSV and manifest writers."""
from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy

from . import __version__

__all__ = ["fmt", "write_csv", "trajectory_columns", "coefficient_columns", "sha256", "write_manifest", "versions"]


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = zip(*[np.asarray(c, dtype=float) for c in columns])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def split_complex(name: str, values) -> tuple[list[str], list[np.ndarray]]:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return [f"Re({name})", f"Im({name})"], [values.real, values.imag]
    return [name], [values]


def trajectory_columns(traj, extra: dict | None = None) -> tuple[list[str], list[np.ndarray]]:
    """Columns ``t, Re(rho_ij)..., Im(rho_ij)..., trace_err, herm_err, min_eig`` plus extras."""
    d = traj.rhos.shape[1]
    idx = [(i, j) for i in range(d) for j in range(d)]
    header = ["t"] + [f"Re(rho_{i}{j})" for i, j in idx] + [f"Im(rho_{i}{j})" for i, j in idx]
    cols = [traj.times] + [traj.rhos[:, i, j].real for i, j in idx] + [traj.rhos[:, i, j].imag for i, j in idx]
    header += ["trace_err", "herm_err", "min_eig"]
    cols += [traj.trace_errors, traj.hermiticity_errors, traj.min_eigenvalues]
    for name, values in (extra or {}).items():
        h, c = split_complex(name, values)
        header += h
        cols += c
    return header, cols


def coefficient_columns(series, names: Iterable[str] | None = None) -> tuple[list[str], list[np.ndarray]]:
    """Columns ``t, Re(X_i), Im(X_i), |X_i|..., singular``."""
    n = series.basis_len
    names = list(names or [f"X{i + 1}" for i in range(n)])
    header = ["t"]
    cols = [series.times]
    for i, name in enumerate(names):
        x = series.coeffs[:, i]
        header += [f"Re({name})", f"Im({name})", f"|{name}|"]
        cols += [x.real, x.imag, np.abs(x)]
    header.append("singular")
    cols.append(series.singular.astype(int))
    return header, cols


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "fqsd": __version__}


def write_manifest(path: Path, payload: dict, files: Sequence[Path]) -> Path:
    path = Path(path)
    body = dict(payload)
    body["versions"] = versions()
    body["files"] = [{"path": Path(f).name, "sha256": sha256(f)} for f in sorted(files, key=lambda p: Path(p).name)]
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")
