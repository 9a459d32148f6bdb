"""Observables: concurrence, expectation values, distances and named series."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .models import ModelSpec

__all__ = [
    "concurrence",
    "expectation",
    "trace_distance",
    "ObservableReport",
    "observable_series",
    "available_observables",
]

log = logging.getLogger(__name__)

_SY = np.array([[0, -1j], [1j, 0]])
_SYSY = np.kron(_SY, _SY)


def _entries(rho) -> np.ndarray:
    return np.asarray(getattr(rho, "entries", rho), dtype=complex)


def concurrence(rho, warn_tol: float = 1e-8) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = _entries(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 matrix, got {rho.shape}")
    rho = 0.5 * (rho + rho.conj().T)
    if np.linalg.eigvalsh(rho)[0] < -warn_tol:
        log.warning("concurrence evaluated on a non-positive matrix")
    flipped = _SYSY @ rho.conj() @ _SYSY
    # sqrt(rho) flipped sqrt(rho) is Hermitian with the same spectrum as rho * flipped
    w, v = np.linalg.eigh(rho)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    r = root @ flipped @ root
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (r + r.conj().T)), 0, None))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def expectation(rho, op) -> complex:
    """``trace(rho @ op)``."""
    rho = _entries(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {op.shape}")
    return complex(np.einsum("ij,ji->", rho, op))


def trace_distance(a, b) -> float:
    """``0.5 * ||a - b||_1`` for Hermitian matrices."""
    d = _entries(a) - _entries(b)
    d = 0.5 * (d + d.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(d)).sum())


@dataclass
class ObservableReport:
    """Named series sampled on ``times``."""

    times: np.ndarray
    series: dict = field(default_factory=dict)

    def add(self, name: str, values) -> None:
        values = np.asarray(values)
        if values.shape[0] != len(self.times):
            raise ValueError(f"series {name} has {values.shape[0]} samples, expected {len(self.times)}")
        self.series[name] = values


def available_observables(model: ModelSpec) -> list[str]:
    names = ["populations"]
    if model.name == "one_qubit":
        names += ["rho21", "sigma_z"]
    if model.name == "two_qubit":
        names += ["concurrence"]
    if model.name == "qbm":
        names += ["mean_q", "mean_p", "mean_n"]
    if model.name == "n_fermion":
        names += [f"n{j + 1}" for j in range(len(model.params["A"]))]
    return names


def observable_series(model: ModelSpec, rhos: np.ndarray, name: str) -> dict[str, np.ndarray]:
    """Evaluate one named observable along a stack of density matrices.

    Returns a mapping of column name to real or complex series.
    """
    if name not in available_observables(model):
        raise ValueError(f"observable {name!r} is not defined for model {model.name}")
    if name == "populations":
        diag = np.real(np.diagonal(rhos, axis1=1, axis2=2))
        return {f"pop{i}": diag[:, i] for i in range(diag.shape[1])}
    if name == "rho21":
        return {"rho21": rhos[:, 1, 0]}
    if name == "concurrence":
        return {"concurrence": np.array([concurrence(r) for r in rhos])}
    ops = {
        "sigma_z": model.operators.get("sigma_z"),
        "mean_q": model.operators.get("q"),
        "mean_p": model.operators.get("p"),
        "mean_n": model.operators.get("n"),
    }
    op = ops.get(name, model.operators.get(name))
    return {name: np.real(np.einsum("kij,ji->k", rhos, op))}
