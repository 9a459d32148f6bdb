"""Data series for the four figure analogs.

Parameters not fixed by the figure captions are documented defaults, so the
series are qualitative analogs rather than curve-level reproductions.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from .config import initial_state
from .errors import ConfigError
from .kernels import OhmicZeroT, OrnsteinUhlenbeck
from .master import integrate
from .models import build_qbm, build_two_qubit
from .observables import concurrence
from .output import write_csv
from .qops import solve_bosonic_O, solve_n_fermion, solve_two_qubit_zeroth

__all__ = ["FIGURE_DEFAULTS", "figdata"]

FIGURE_DEFAULTS = {
    "fig1": {
        "T": 10.0, "h": 0.01, "Gamma": 0.1, "omega_c": [0.5, 1.0, 2.0],
        "two_qubit": {"omega_A": 1.0, "omega_B": 1.0, "J_xy": 0.0, "J_z": 0.0, "kappa_A": 1.0, "kappa_B": 1.0},
    },
    "fig2": {
        "T": 10.0, "h": 0.01, "Gamma": 0.1, "omega_c": 2.0,
        "two_qubit": {"omega_A": 1.0, "omega_B": 1.0, "J_xy": 0.5, "J_z": 0.2, "kappa_A": 1.0, "kappa_B": 1.0},
    },
    "fig3": {"T": 10.0, "h": 0.01, "omega_m": 1.0, "Omega": float(np.pi / 2), "gamma": [0.5, 2.0, 8.0], "n_max": 30, "q0": 1.0},
    "fig4": {"T": 10.0, "h": 0.02, "omega_1": 2.0, "omega_2": 1.0, "gamma": 0.4, "Omega": float(np.pi / 4)},
}


def _merge(fig: str, overrides: Optional[dict]) -> dict:
    params = {k: (dict(v) if isinstance(v, dict) else v) for k, v in FIGURE_DEFAULTS[fig].items()}
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ConfigError(f"unknown {fig} parameter {key!r}; known: {sorted(params)}")
        if isinstance(params[key], dict):
            params[key].update(value)
        else:
            params[key] = value
    return params


def _label(name: str, value) -> str:
    return f"{name}={float(value):g}"


def figdata(fig: str, overrides: Optional[dict], out_dir: Path) -> list[Path]:
    """Write the CSV series for ``fig`` into ``out_dir`` and return the paths."""
    if fig not in FIGURE_DEFAULTS:
        raise ConfigError(f"unknown figure {fig!r}; expected one of {sorted(FIGURE_DEFAULTS)}")
    p = _merge(fig, overrides)
    out_dir = Path(out_dir)
    T, h = float(p["T"]), float(p["h"])
    if fig == "fig1":
        model = build_two_qubit(**p["two_qubit"])
        rho0 = initial_state(model, {"type": "bell"})
        header, cols, times = ["t"], [], None
        for wc in p["omega_c"]:
            traj = integrate(model, OhmicZeroT(float(p["Gamma"]), float(wc)), rho0, T, h)
            conc = np.full(int(round(T / h)) + 1, np.nan)
            conc[: len(traj.times)] = [concurrence(r) for r in traj.rhos]
            header.append(f"concurrence[{_label('omega_c', wc)}]")
            cols.append(conc)
        times = np.linspace(0, T, len(cols[0]))
        return [write_csv(out_dir / "fig1_concurrence.csv", header, [times] + cols)]
    if fig == "fig2":
        s = solve_two_qubit_zeroth(OhmicZeroT(float(p["Gamma"]), float(p["omega_c"])), p["two_qubit"], T, h)
        header = ["t"] + [f"|F{i + 1}|" for i in range(4)]
        return [write_csv(out_dir / "fig2_F_traces.csv", header, [s.times] + [np.abs(s.coeffs[:, i]) for i in range(4)])]
    if fig == "fig3":
        model = build_qbm(float(p["omega_m"]), int(p["n_max"]))
        rho0 = initial_state(model, {"type": "coherent", "q0": float(p["q0"])})
        header, cols = ["t"], []
        for g in p["gamma"]:
            traj = integrate(model, OrnsteinUhlenbeck(float(g), float(p["Omega"])), rho0, T, h)
            q = np.full(int(round(T / h)) + 1, np.nan)
            q[: len(traj.times)] = np.real(np.einsum("kij,ji->k", traj.rhos, model.operators["q"]))
            header.append(f"mean_q[{_label('gamma', g)}]")
            cols.append(q)
        times = np.linspace(0, T, len(cols[0]))
        return [write_csv(out_dir / "fig3_mean_q.csv", header, [times] + cols)]
    kern = OrnsteinUhlenbeck(float(p["gamma"]), float(p["Omega"]))
    ferm = solve_n_fermion(kern, [float(p["omega_1"]), float(p["omega_2"])], T, h)
    bos = solve_bosonic_O(kern, float(p["omega_1"]), float(p["omega_2"]), T, h)
    fcoef = np.zeros_like(bos.coeffs)
    fcoef[:, :2] = ferm.coeffs
    header = ["t"] + [f"fermion_|X{i + 1}|" for i in range(4)] + [f"boson_|X{i + 1}|" for i in range(4)]
    cols = [bos.times] + [np.abs(fcoef[:, i]) for i in range(4)] + [np.abs(bos.coeffs[:, i]) for i in range(4)]
    return [write_csv(out_dir / "fig4_coefficients.csv", header, cols)]
