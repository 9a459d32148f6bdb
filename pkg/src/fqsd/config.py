"""Run configuration: parsing, validation and initial states."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError
from .kernels import CorrelationKernel, kernel_from_dict, _as_complex
from .models import ModelSpec, model_from_dict
from .observables import available_observables

__all__ = ["RunConfig", "load_config", "parse_config", "initial_state", "set_path"]

COEFF_SOURCES = ("grid", "riccati", "closed_form")


@dataclass
class RunConfig:
    """Validated run description.  ``raw`` keeps the parsed mapping for echoing."""

    raw: dict
    model: ModelSpec
    kernel: CorrelationKernel
    T: float
    h: float
    coeff_source: str
    rho0: np.ndarray
    out_dir: Path
    prefix: str
    observables: list
    sweep: Optional[dict] = None
    extra: dict = field(default_factory=dict)


def load_config(path, overrides: Optional[dict] = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping with model, kernel and integrator blocks")
    for key, value in (overrides or {}).items():
        if value is not None:
            set_path(raw, key, value)
    return raw


def set_path(raw: dict, dotted: str, value: Any) -> None:
    """Assign ``raw['a']['b'] = value`` for ``dotted = 'a.b'``."""
    node = raw
    keys = dotted.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {key} is not a block")
    node[keys[-1]] = value


def _coherent(model: ModelSpec, q0: float, p0: float = 0.0) -> np.ndarray:
    alpha = (q0 + 1j * p0) / np.sqrt(2)
    n = np.arange(model.dim)
    amps = np.array([alpha**k / np.sqrt(float(factorial(k))) for k in n], dtype=complex)
    return amps / np.linalg.norm(amps)


def initial_state(model: ModelSpec, block: Optional[dict]) -> np.ndarray:
    """Density matrix for an ``initial_state`` block.

    Types: ``default``, ``basis`` (``index``), ``vector`` (``values``),
    ``density`` (``values``), ``bell`` (two qubits), ``coherent`` (QBM, ``q0``, ``p0``).
    Defaults: one qubit ``(|e>+|g>)/sqrt2``; two qubits ``(|ee>+|gg>)/sqrt2``;
    oscillator coherent state with ``<q> = 1``; fermions all modes occupied.
    """
    block = dict(block or {"type": "default"})
    kind = block.get("type", "default")
    d = model.dim
    if kind == "default":
        kind = {"one_qubit": "vector", "two_qubit": "bell", "qbm": "coherent"}.get(model.name, "basis")
        if model.name == "one_qubit":
            block["values"] = [1, 1]
        block.setdefault("index", d - 1)
    if kind == "basis":
        idx = int(block.get("index", 0))
        if not 0 <= idx < d:
            raise ConfigError(f"basis index {idx} out of range for dimension {d}")
        psi = np.zeros(d, dtype=complex)
        psi[idx] = 1
    elif kind == "vector":
        psi = np.array([_as_complex(v) for v in block.get("values", [])], dtype=complex)
        if psi.shape != (d,) or np.linalg.norm(psi) == 0:
            raise ConfigError(f"state vector must have {d} entries and nonzero norm")
        psi = psi / np.linalg.norm(psi)
    elif kind == "bell":
        if d != 4:
            raise ConfigError("bell state needs the two-qubit model")
        psi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    elif kind == "coherent":
        if model.name != "qbm":
            raise ConfigError("coherent state needs the qbm model")
        psi = _coherent(model, float(block.get("q0", 1.0)), float(block.get("p0", 0.0)))
    elif kind == "density":
        rho = np.array([[_as_complex(v) for v in row] for row in block.get("values", [])], dtype=complex)
        if rho.shape != (d, d):
            raise ConfigError(f"density matrix must be {d}x{d}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12 or abs(np.trace(rho) - 1) > 1e-12:
            raise ConfigError("density matrix must be Hermitian with unit trace")
        return rho
    else:
        raise ConfigError(f"unknown initial_state type {kind!r}")
    return np.outer(psi, psi.conj())


def parse_config(raw: dict, env_out: Optional[str] = None) -> RunConfig:
    """Validate a parsed mapping and build the run objects."""
    raw = copy.deepcopy(raw)
    for key in ("model", "kernel", "integrator"):
        if not isinstance(raw.get(key), dict):
            raise ConfigError(f"config is missing the '{key}' block")
    model = model_from_dict(raw["model"])
    kernel = kernel_from_dict(raw["kernel"])
    integ = raw["integrator"]
    try:
        T = float(integ["T"])
        h = float(integ["h"])
    except KeyError as exc:
        raise ConfigError(f"integrator block is missing {exc}") from None
    except (TypeError, ValueError):
        raise ConfigError("integrator T and h must be numbers") from None
    if not (T > 0 and np.isfinite(T)):
        raise ConfigError(f"integrator.T must be positive, got {T}")
    if not (h > 0 and np.isfinite(h)):
        raise ConfigError(f"integrator.h must be positive, got {h}")
    if h > T / 10:
        raise ConfigError(f"integrator.h={h} violates h <= T/10 = {T / 10}")
    n = round(T / h)
    if abs(n * h - T) > 1e-9 * T:
        raise ConfigError(f"integrator.h={h} must divide T={T}")
    source = str(integ.get("coeff_source", "grid"))
    if source not in COEFF_SOURCES:
        raise ConfigError(f"coeff_source must be one of {COEFF_SOURCES}, got {source!r}")
    rho0 = initial_state(model, raw.get("initial_state"))
    outputs = raw.get("outputs") or {}
    out_dir = Path(env_out or outputs.get("dir", "output"))
    prefix = str(outputs.get("prefix", model.name))
    observables = list(outputs.get("observables", []))
    valid = available_observables(model)
    bad = [o for o in observables if o not in valid]
    if bad:
        raise ConfigError(f"observables {bad} are not defined for {model.name}; choose from {valid}")
    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or "parameter" not in sweep or not sweep.get("values"):
            raise ConfigError("sweep block needs 'parameter' and a non-empty 'values' list")
        if str(sweep["parameter"]).split(".")[0] not in ("model", "kernel", "integrator", "initial_state"):
            raise ConfigError(f"sweep parameter {sweep['parameter']!r} must start with model., kernel., integrator. or initial_state.")
    return RunConfig(raw, model, kernel, T, h, source, rho0, out_dir, prefix, observables, sweep)
