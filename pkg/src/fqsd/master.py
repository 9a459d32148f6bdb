"""Time-local master equations driven by Q-bar coefficients.

The generator is ``d rho/dt = -i[H, rho] + [L, rho Qbar^+] + [Qbar rho, L^+]``
with ``Qbar = sum_i X_i(t) q_i``.  Replacing ``Qbar`` by ``gamma_f L`` gives the
Lindblad reference.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, NumericalError
from .kernels import CorrelationKernel, OrnsteinUhlenbeck
from .models import ModelSpec
from .qops import QbarSeries, one_qubit_amplitude, solve_for_model

__all__ = [
    "DensityMatrix",
    "Trajectory",
    "rhs",
    "integrate",
    "integrate_with_series",
    "lindblad_reference",
    "markov_limit_check",
]

log = logging.getLogger(__name__)


@dataclass
class DensityMatrix:
    """A density matrix at a given time."""

    entries: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace_error(self) -> float:
        return float(abs(np.trace(self.entries) - 1))

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    @property
    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])


@dataclass
class Trajectory:
    """Density matrices on a uniform time grid.

    ``truncated_at`` is the time of the first singular coefficient sample when
    the run had to stop early.
    """

    times: np.ndarray
    rhos: np.ndarray
    qbar: Optional[QbarSeries] = None
    truncated_at: Optional[float] = None
    observables: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[DensityMatrix]:
        return [DensityMatrix(r, float(t)) for t, r in zip(self.times, self.rhos)]

    @property
    def trace_errors(self) -> np.ndarray:
        return np.abs(np.trace(self.rhos, axis1=1, axis2=2) - 1)

    @property
    def hermiticity_errors(self) -> np.ndarray:
        return np.max(np.abs(self.rhos - np.conj(np.swapaxes(self.rhos, 1, 2))), axis=(1, 2))

    @property
    def min_eigenvalues(self) -> np.ndarray:
        herm = 0.5 * (self.rhos + np.conj(np.swapaxes(self.rhos, 1, 2)))
        return np.linalg.eigvalsh(herm)[:, 0]


def _as_matrix(rho) -> np.ndarray:
    return np.asarray(rho.entries if isinstance(rho, DensityMatrix) else rho, dtype=complex)


def rhs(model: ModelSpec, qbar: np.ndarray, rho) -> np.ndarray:
    """Right-hand side of the master equation for a given ``Qbar`` matrix."""
    rho = _as_matrix(rho)
    H, L = model.H, model.L
    if rho.shape != H.shape or np.shape(qbar) != H.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape}, Qbar {np.shape(qbar)}, model {H.shape}")
    Ld = L.conj().T
    qd = np.conj(qbar).T
    rq = rho @ qd
    qr = qbar @ rho
    return -1j * (H @ rho - rho @ H) + (L @ rq - rq @ L) + (qr @ Ld - Ld @ qr)


def _validate_rho(model: ModelSpec, rho0) -> np.ndarray:
    rho0 = _as_matrix(rho0)
    if rho0.shape != (model.dim, model.dim):
        raise ConfigError(f"initial state has shape {rho0.shape}, model needs {(model.dim, model.dim)}")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10 or abs(np.trace(rho0) - 1) > 1e-10:
        raise ConfigError("initial state must be Hermitian with unit trace")
    return rho0


def _rk4(model: ModelSpec, rho0: np.ndarray, n: int, h: float, qbar_at: Callable[[int, float], np.ndarray]) -> np.ndarray:
    """RK4 with ``qbar_at(k, c)`` giving Qbar at time ``(k + c) h``."""
    out = np.empty((n + 1,) + rho0.shape, dtype=complex)
    out[0] = rho = rho0
    for k in range(n):
        q0, qm, q1 = qbar_at(k, 0.0), qbar_at(k, 0.5), qbar_at(k, 1.0)
        k1 = rhs(model, q0, rho)
        k2 = rhs(model, qm, rho + 0.5 * h * k1)
        k3 = rhs(model, qm, rho + 0.5 * h * k2)
        k4 = rhs(model, q1, rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(rho)):
            raise NumericalError(f"non-finite density matrix at t={(k + 1) * h:.6g}")
        out[k + 1] = rho
    return out


def integrate_with_series(model: ModelSpec, series: QbarSeries, rho0) -> Trajectory:
    """Integrate the master equation with precomputed coefficients.

    Midpoint coefficients are linear interpolations of the grid values.  The
    run stops before the first singular sample.
    """
    rho0 = _validate_rho(model, rho0)
    h = series.h
    stop = series.first_singular
    n = len(series.times) - 1 if stop is None else stop - 1
    truncated = None if stop is None else float(series.times[stop])
    if stop is not None:
        log.warning("trajectory truncated at t=%.6g: singular coefficient", truncated)
    nb = series.basis_len
    ops = np.array(model.q_basis[:nb])
    mats = np.tensordot(series.coeffs, ops, axes=(1, 0))

    def qbar_at(k, c):
        if c == 0.0:
            return mats[k]
        if c == 1.0:
            return mats[k + 1]
        return 0.5 * (mats[k] + mats[k + 1])

    rhos = _rk4(model, rho0, max(n, 0), h, qbar_at)
    return Trajectory(series.times[: max(n, 0) + 1].copy(), rhos, series, truncated)


def _closed_form_trajectory(model: ModelSpec, kernel, rho0, T, h) -> Trajectory:
    """Exponential stepping with exactly integrated coefficients.

    Over one step the generator is ``L_H + conj(I) D1 + I D2`` with
    ``I = int X dt = log(u(t_k) / u(t_k+1))``.  For the one-qubit model the
    three superoperators commute, so the step is exact and stays finite
    when ``X`` itself passes through a pole.
    """
    from .qops import _closed_one_qubit, _grid_size

    if model.name != "one_qubit":
        raise ConfigError("the closed-form path exists only for the one-qubit model")
    rho0 = _validate_rho(model, rho0)
    n = _grid_size(T, h)
    times = np.linspace(0.0, n * h, n + 1)
    u, _ = one_qubit_amplitude(kernel, model.params["omega"], times)
    if np.any(u == 0):
        raise NumericalError("closed-form amplitude vanishes exactly on a grid point; shift h")
    d = model.dim

    def superop(f):
        return np.column_stack([f(e.reshape(d, d)).reshape(-1) for e in np.eye(d * d)])

    L = model.L
    Ld = L.conj().T
    q = model.q_basis[0]
    qd = q.conj().T
    gen_h = superop(lambda r: -1j * (model.H @ r - r @ model.H))
    gen_1 = superop(lambda r: L @ r @ qd - r @ qd @ L)  # multiplies conj(X)
    gen_2 = superop(lambda r: q @ r @ Ld - Ld @ q @ r)  # multiplies X
    rhos = np.empty((n + 1, d, d), dtype=complex)
    rhos[0] = rho0
    vec = rho0.reshape(-1)
    for k in range(n):
        integral = np.log(u[k] / u[k + 1] + 0j)
        vec = expm(h * gen_h + np.conj(integral) * gen_1 + integral * gen_2) @ vec
        rhos[k + 1] = vec.reshape(d, d)
    series = _closed_one_qubit(kernel, model.params["omega"], T, h)
    return Trajectory(times, rhos, series)


def integrate(model: ModelSpec, kernel: CorrelationKernel, rho0, T: float, h: float, coeff_source: str = "grid") -> Trajectory:
    """Solve the coefficient equations and integrate the master equation.

    Parameters
    ----------
    coeff_source : {"grid", "riccati", "closed_form"}
        ``grid`` uses the two-time lattice, ``riccati`` the exponential-kernel
        shortcut, ``closed_form`` the analytic one-qubit single-mode solution.
    """
    if model.name == "n_boson":
        raise ConfigError("the bosonic comparison model has noise-dependent terms; no deterministic master equation")
    if coeff_source == "closed_form":
        return _closed_form_trajectory(model, kernel, rho0, T, h)
    series = solve_for_model(model, kernel, T, h, coeff_source)
    return integrate_with_series(model, series, rho0)


def lindblad_reference(model: ModelSpec, gamma_f: float, rho0, T: float, h: float) -> Trajectory:
    """Constant-rate limit ``Qbar = gamma_f L``."""
    from .qops import _grid_size

    if gamma_f < 0:
        raise ConfigError("gamma_f must be non-negative")
    rho0 = _validate_rho(model, rho0)
    n = _grid_size(T, h)
    q = gamma_f * model.L
    rhos = _rk4(model, rho0, n, h, lambda k, c: q)
    return Trajectory(np.linspace(0.0, n * h, n + 1), rhos)


def markov_limit_check(model: ModelSpec, kernel: OrnsteinUhlenbeck, rho0, T: float, h: Optional[float] = None, gamma_f: Optional[float] = None) -> float:
    """Max trace distance between the memory-kernel run and its Lindblad limit.

    The step defaults to ``min(1e-3, 0.25 / gamma)`` so the kernel decay is
    resolved; coefficients come from the exponential-kernel shortcut.
    """
    from .observables import trace_distance

    if not isinstance(kernel, OrnsteinUhlenbeck):
        raise ConfigError("markov_limit_check needs an Ornstein-Uhlenbeck kernel")
    if kernel.Omega != 0:
        raise ConfigError("markov_limit_check needs Omega = 0")
    if h is None:
        h = T / int(np.ceil(T / min(1e-3, 0.25 / kernel.gamma)))
    if gamma_f is None:
        gamma_f = 0.5
    memory = integrate(model, kernel, rho0, T, h, coeff_source="riccati")
    ref = lindblad_reference(model, gamma_f, rho0, T, h)
    n = len(memory.times)
    return max(trace_distance(a, b) for a, b in zip(memory.rhos, ref.rhos[:n]))
