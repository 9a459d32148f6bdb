"""Coefficient equations for the time-local Q-bar operators.

Every model writes its Q operator as ``Q(t, s) = sum_i x_i(t, s) q_i`` with
``x(t, t)`` fixed by ``L``.  The coefficients obey a linear system
``d/dt x(t, s) = M(X(t)) x(t, s)`` whose matrix depends on the memory
integrals ``X_i(t) = int_0^t K(t, s) x_i(t, s) ds``.  Three routes are
provided:

``grid``
    Method of lines on the (t, s) lattice.  Each stored column ``x(., s_j)``
    is advanced with RK4 in t; at every RK4 stage the memory integral is
    rebuilt by trapezoid over the stored columns plus the partial interval
    ahead of the last column.  Quadrature makes the method O(h^2).
``riccati``
    For kernels that are finite sums of exponentials the memory integrals
    close on themselves: ``dX^(i)/dt = c_i x(t,t) - lam_i X^(i) + M(X) X^(i)``.
``closed_form``
    Analytic single-mode solution of the one-qubit model.

The exact two-qubit solver and the bosonic comparison model carry a
three-time field ``f5(t, s, s')`` stored as a dense (s, s') matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .kernels import CorrelationKernel, DiscreteModes, SingleMode
from .models import ModelSpec, build_two_qubit

__all__ = [
    "QbarSeries",
    "CoefficientGrid",
    "one_qubit_amplitude",
    "solve_one_qubit",
    "solve_two_qubit_zeroth",
    "solve_two_qubit_exact",
    "solve_qbm_zeroth",
    "solve_n_fermion",
    "solve_bosonic_O",
    "solve_for_model",
    "coefficient_matrix",
]

log = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e6
# h * |X| above this means x(t, s) changes by more than ~e^0.5 per step and the
# trapezoid memory integral is no longer resolved.
RESOLUTION_LIMIT = 0.5
THREE_TIME_CAP = 2000


@dataclass
class CoefficientGrid:
    """Full two-time history, kept only on request.

    ``x[i, k, j] = x_i(t_k, s_j)`` for ``j <= k``; entries above the diagonal are NaN.
    ``f5`` maps a time index ``k`` to the (s, s') matrix ``f5(t_k, s_j, s'_m)``.
    """

    times: np.ndarray
    x: np.ndarray
    f5: dict = field(default_factory=dict)


@dataclass
class QbarSeries:
    """Memory-integral traces ``X_i(t_k)`` on a uniform grid.

    Attributes
    ----------
    times : ndarray, shape (n + 1,)
    coeffs : ndarray, shape (n + 1, basis_len)
    singular : ndarray of bool
        True from the first flagged sample on.
    method : str
    noise : ndarray or None
        ``noise[k, m] = F5(t_k, s'_m)`` for ``m <= k`` (three-time solvers).
    grid : CoefficientGrid or None
    """

    times: np.ndarray
    coeffs: np.ndarray
    singular: np.ndarray
    method: str
    noise: Optional[np.ndarray] = None
    grid: Optional[CoefficientGrid] = None

    @property
    def basis_len(self) -> int:
        return self.coeffs.shape[1]

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def first_singular(self) -> Optional[int]:
        idx = np.flatnonzero(self.singular)
        return int(idx[0]) if idx.size else None

    def at(self, t: float) -> np.ndarray:
        """Coefficients at time ``t`` by linear interpolation."""
        pos = t / self.h
        k = int(np.floor(pos + 1e-9))
        k = min(max(k, 0), len(self.times) - 1)
        frac = pos - k
        if abs(frac) < 1e-9 or k == len(self.times) - 1:
            return self.coeffs[k]
        return (1 - frac) * self.coeffs[k] + frac * self.coeffs[k + 1]


def _grid_size(T: float, h: float) -> int:
    if not (np.isfinite(T) and np.isfinite(h)) or T <= 0 or h <= 0:
        raise ConfigError(f"T and h must be positive, got T={T}, h={h}")
    n = int(round(T / h))
    if n < 1 or abs(n * h - T) > 1e-9 * max(1.0, T):
        raise ConfigError(f"h={h} must divide T={T}")
    return n


def _is_bad(values: np.ndarray, h: float) -> bool:
    if not np.all(np.isfinite(values)):
        return True
    peak = np.max(np.abs(values)) if values.size else 0.0
    return peak > DIVERGENCE_THRESHOLD or h * peak > RESOLUTION_LIMIT


# ---------------------------------------------------------------------------
# coefficient matrices M(X) per model
# ---------------------------------------------------------------------------

def _one_qubit_matrix(omega: float):
    def matrix(X):
        return np.array([[1j * omega + X[0]]])

    return matrix


def _n_fermion_matrix(A):
    diag = 1j * np.asarray(A, dtype=float)

    def matrix(X):
        # row j: i A_j x_j + X_j * sum_i x_i
        return np.diag(diag) + np.outer(X, np.ones(len(diag)))

    return matrix


def _qbm_matrix(omega_m: float):
    def matrix(X):
        X1, X2 = X
        return np.array(
            [[1j * X2, 2 * omega_m - 2j * X1], [-2 * omega_m, -1j * X2]]
        )

    return matrix


def _two_qubit_matrix(p: dict):
    wA, wB = p["omega_A"], p["omega_B"]
    J, Jz = p["J_xy"], p["J_z"]
    kA, kB = p["kappa_A"], p["kappa_B"]

    def matrix(F):
        F1, F2, F3, F4 = F
        return np.array(
            [
                [2j * wA + kA * F1 + kB * F3, 0, -1j * J - kB * F1 + kB * F4, 2j * Jz + kB * F3 + kA * F4],
                [0, 2j * wB + kB * F2 + kA * F4, 2j * Jz + kB * F3 + kA * F4, -1j * J - kA * F2 + kA * F3],
                [-1j * J - kA * F2 + kA * F3, 2j * Jz + kB * F3 + kA * F4, 2j * wB + kB * F2 + kA * F4, 0],
                [2j * Jz + kB * F3 + kA * F4, -1j * J - kB * F1 + kB * F4, 0, 2j * wA + kA * F1 + kB * F3],
            ]
        )

    return matrix


def _boson_matrix(w1: float, w2: float):
    def matrix(X):
        X1, X2, X3, X4 = X
        return np.array(
            [
                [1j * w1 + X1, X1, 0, 0],
                [X2, 1j * w2 + X2, 0, 0],
                [0, X3 - X4, 1j * w2 + X2 + X3 - X4, -X2],
                [X4 - X3, 0, -X1, 1j * w1 + X1 + X3 - X4],
            ]
        )

    return matrix


def coefficient_matrix(model: ModelSpec) -> Callable[[np.ndarray], np.ndarray]:
    """``M(X)`` with ``d/dt x(t, s) = M(X(t)) x(t, s)`` for the model's two-time coefficients."""
    p = model.params
    if model.name == "one_qubit":
        return _one_qubit_matrix(p["omega"])
    if model.name == "n_fermion":
        return _n_fermion_matrix(p["A"])
    if model.name == "qbm":
        return _qbm_matrix(p["omega_m"])
    if model.name == "two_qubit":
        return _two_qubit_matrix(p)
    if model.name == "n_boson":
        return _boson_matrix(p["omega_1"], p["omega_2"])
    raise ConfigError(f"no coefficient equations for model {model.name!r}")


# ---------------------------------------------------------------------------
# three-time extension
# ---------------------------------------------------------------------------

@dataclass
class _ThreeTime:
    """Noise-coefficient field ``y(t, s, s')`` coupled to the two-time system.

    ``d/dt x(t, s) += source * Y(t, s)`` and
    ``d/dt y(t, s, s') = a(x(t, s)) Y(t, s') + b(X(t)) y(t, s, s')`` with
    ``Y(t, s') = int_0^t K(t, s) y(t, s, s') ds``.  New rows (s = t) start at 0
    and new columns (s' = t) start at ``boundary(x(t, s))``.
    """

    source: np.ndarray
    a: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], complex]
    boundary: Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# grid engine
# ---------------------------------------------------------------------------

def _march_grid(
    kernel: CorrelationKernel,
    T: float,
    h: float,
    init: np.ndarray,
    matrix: Callable[[np.ndarray], np.ndarray],
    three: Optional[_ThreeTime] = None,
    keep_fields: bool = False,
    snapshots=(),
    method: str = "grid",
) -> QbarSeries:
    n = _grid_size(T, h)
    init = np.asarray(init, dtype=complex)
    nf = init.size
    kh = kernel.lag_table(h, n + 1, refine=2)  # K(m h / 2)
    # offsets o = 0, 1, 2 correspond to stage times t_k, t_k + h/2, t_k + h
    strided = [kh[o::2] for o in range(3)]

    x = np.zeros((nf, n + 1), dtype=complex)
    x[:, 0] = init
    X = np.full((n + 1, nf), np.nan + 0j)
    X[0] = 0
    singular = np.zeros(n + 1, dtype=bool)
    hist = None
    if keep_fields:
        hist = np.full((nf, n + 1, n + 1), np.nan + 0j)
        hist[:, 0, 0] = init
    if three is not None:
        y = np.zeros((n + 1, n + 1), dtype=complex)
        y[0, 0] = 0.5 * three.boundary(init[:, None])[0]
        noise = np.full((n + 1, n + 1), np.nan + 0j)
        noise[0, 0] = 0
    else:
        y = noise = None
    f5_snaps = {}
    snapshots = set(snapshots)
    if 0 in snapshots and y is not None:
        f5_snaps[0] = y[:1, :1].copy()

    def weights(k: int, o: int) -> np.ndarray:
        w = strided[o][k::-1] * h
        if k == 0:
            return np.zeros(1, dtype=complex)
        w = w.copy()
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def memory(xs, ys, k, o, w):
        Xs = xs @ w
        Ys = ys.T @ w if ys is not None else None
        if o:
            c = 0.5 * o * h
            Xs = Xs + 0.5 * c * (kh[o] * xs[:, k] + kh[0] * init)
            if ys is not None:
                Ys = Ys + 0.5 * c * kh[o] * ys[k, :]
        return Xs, Ys

    def deriv(xs, ys, k, o, w):
        Xs, Ys = memory(xs, ys, k, o, w)
        dx = matrix(Xs) @ xs
        dy = None
        if three is not None:
            dx = dx + np.outer(three.source, Ys)
            dy = np.outer(three.a(xs), Ys) + three.b(Xs) * ys
        return dx, dy

    for k in range(n):
        m = k + 1
        xs = x[:, :m]
        ys = y[:m, :m] if y is not None else None
        w0, w1, w2 = weights(k, 0), weights(k, 1), weights(k, 2)
        d1 = deriv(xs, ys, k, 0, w0)
        d2 = deriv(xs + 0.5 * h * d1[0], None if ys is None else ys + 0.5 * h * d1[1], k, 1, w1)
        d3 = deriv(xs + 0.5 * h * d2[0], None if ys is None else ys + 0.5 * h * d2[1], k, 1, w1)
        d4 = deriv(xs + h * d3[0], None if ys is None else ys + h * d3[1], k, 2, w2)
        x[:, :m] = xs + (h / 6) * (d1[0] + 2 * d2[0] + 2 * d3[0] + d4[0])
        x[:, m] = init
        if y is not None:
            y[:m, :m] = ys + (h / 6) * (d1[1] + 2 * d2[1] + 2 * d3[1] + d4[1])
            y[m, :m] = 0
            y[:m, m] = three.boundary(x[:, :m])
            # s = s' = t sits on a jump between the zero row and the boundary
            # column; the mean of both limits keeps the trapezoid second order.
            y[m, m] = 0.5 * three.boundary(init[:, None])[0]
        Xn, Yn = memory(x[:, : m + 1], None if y is None else y[: m + 1, : m + 1], m, 0, weights(m, 0))
        X[m] = Xn
        if y is not None:
            noise[m, : m + 1] = Yn
        if hist is not None:
            hist[:, m, : m + 1] = x[:, : m + 1]
        if y is not None and m in snapshots:
            f5_snaps[m] = y[: m + 1, : m + 1].copy()
        check = Xn if Yn is None else np.concatenate([Xn, Yn])
        if _is_bad(check, h) or not np.all(np.isfinite(x[:, : m + 1])):
            singular[m:] = True
            if not np.all(np.isfinite(Xn)):
                X[m] = np.nan
            log.warning("coefficient flagged singular at t=%.6g (|X|=%.3g)", m * h, np.nanmax(np.abs(Xn)))
            break

    times = np.linspace(0.0, n * h, n + 1)
    grid = CoefficientGrid(times, hist, f5_snaps) if (keep_fields or f5_snaps) else None
    return QbarSeries(times, X, singular, method, noise=noise, grid=grid)


def _march_riccati(kernel: CorrelationKernel, T: float, h: float, init, matrix) -> QbarSeries:
    comps = kernel.exponential_components()
    if comps is None:
        raise ConfigError(f"{type(kernel).__name__} is not a sum of exponentials; use the grid method")
    n = _grid_size(T, h)
    init = np.asarray(init, dtype=complex)
    c = np.array([ci for ci, _ in comps], dtype=complex)
    lam = np.array([li for _, li in comps], dtype=complex)
    source = np.outer(init, c)

    def f(Y):
        return source - Y * lam + matrix(Y.sum(axis=1)) @ Y

    Y = np.zeros((init.size, c.size), dtype=complex)
    X = np.full((n + 1, init.size), np.nan + 0j)
    X[0] = 0
    singular = np.zeros(n + 1, dtype=bool)
    for k in range(n):
        k1 = f(Y)
        k2 = f(Y + 0.5 * h * k1)
        k3 = f(Y + 0.5 * h * k2)
        k4 = f(Y + h * k3)
        Y = Y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        X[k + 1] = Y.sum(axis=1)
        if _is_bad(X[k + 1], h):
            singular[k + 1:] = True
            log.warning("coefficient flagged singular at t=%.6g", (k + 1) * h)
            break
    return QbarSeries(np.linspace(0.0, n * h, n + 1), X, singular, "riccati")


# ---------------------------------------------------------------------------
# closed form (one qubit, single mode)
# ---------------------------------------------------------------------------

def _single_mode(kernel: CorrelationKernel) -> tuple[complex, float]:
    if isinstance(kernel, SingleMode):
        return kernel.g, kernel.omega_b
    if isinstance(kernel, DiscreteModes) and len(kernel.modes) == 1:
        return kernel.modes[0]
    raise ConfigError("the closed-form path needs a single-mode kernel")


def one_qubit_amplitude(kernel: CorrelationKernel, omega: float, t):
    """Analytic ``u(t)`` with ``X_1 = -u'/u`` for a single-mode bath.

    ``u`` solves ``u'' + i (omega_b - omega) u' + |g|^2 u = 0``, ``u(0) = 1``,
    ``u'(0) = 0``; at resonance ``u = cos(|g| t)``.  Returns ``(u, u')``.
    """
    g, wb = _single_mode(kernel)
    t = np.asarray(t, dtype=float)
    delta = wb - omega
    width = np.sqrt(delta**2 + 4 * abs(g) ** 2 + 0j)
    rp = 0.5j * (-delta + width)
    rm = 0.5j * (-delta - width)
    if abs(rp - rm) < 1e-300:
        return np.ones_like(t, dtype=complex), np.zeros_like(t, dtype=complex)
    A = -rm / (rp - rm)
    B = rp / (rp - rm)
    u = A * np.exp(rp * t) + B * np.exp(rm * t)
    du = A * rp * np.exp(rp * t) + B * rm * np.exp(rm * t)
    return u, du


def _closed_one_qubit(kernel, omega, T, h) -> QbarSeries:
    n = _grid_size(T, h)
    times = np.linspace(0.0, n * h, n + 1)
    u, du = one_qubit_amplitude(kernel, omega, times)
    with np.errstate(divide="ignore", invalid="ignore"):
        X = -du / u
    singular = ~np.isfinite(X) | (np.abs(X) > DIVERGENCE_THRESHOLD)
    return QbarSeries(times, X[:, None], singular, "closed_form")


# ---------------------------------------------------------------------------
# public solvers
# ---------------------------------------------------------------------------

def _two_time(model: ModelSpec, kernel, T, h, method, keep_fields=False) -> QbarSeries:
    matrix = coefficient_matrix(model)
    if method == "grid":
        return _march_grid(kernel, T, h, model.init, matrix, keep_fields=keep_fields)
    if method == "riccati":
        return _march_riccati(kernel, T, h, model.init, matrix)
    raise ConfigError(f"unknown coefficient method {method!r}")


def solve_one_qubit(kernel, omega: float, T: float, h: float, method: str = "grid", keep_fields: bool = False) -> QbarSeries:
    """``X_1(t)`` for the one-qubit model (``Q-bar = X_1 sigma_minus``)."""
    from .models import build_one_qubit

    if method == "closed_form":
        return _closed_one_qubit(kernel, omega, T, h)
    return _two_time(build_one_qubit(omega), kernel, T, h, method, keep_fields)


def _two_qubit_model(params) -> ModelSpec:
    if isinstance(params, ModelSpec):
        return params
    return build_two_qubit(**dict(params))


def solve_two_qubit_zeroth(kernel, params, T: float, h: float, method: str = "grid", keep_fields: bool = False) -> QbarSeries:
    """``F_1..F_4`` for the two-qubit model with the noise-free ansatz."""
    return _two_time(_two_qubit_model(params), kernel, T, h, method, keep_fields)


def _check_cap(T, h, cap):
    n = _grid_size(T, h)
    if n > cap:
        raise ConfigError(f"three-time solver needs T/h <= {cap} (got {n}); increase h")


def solve_two_qubit_exact(kernel, params, T: float, h: float, cap: int = THREE_TIME_CAP, keep_fields: bool = False, snapshots=()) -> QbarSeries:
    """``F_1..F_4`` plus the noise integral ``F5(t, s')`` of the exact two-qubit ansatz."""
    _check_cap(T, h, cap)
    model = _two_qubit_model(params)
    p = model.params
    kA, kB = p["kappa_A"], p["kappa_B"]
    wA, wB = p["omega_A"], p["omega_B"]
    three = _ThreeTime(
        source=-1j * np.array([kB, kA, kA, kB]),
        a=lambda f: kA * f[0] + kB * f[1] - kB * f[2] - kA * f[3],
        b=lambda F: 2j * (wA + wB) + kA * F[0] + kA * F[3] + kB * F[1] + kB * F[2],
        boundary=lambda f: 1j * (kA * f[1] + kB * f[0]),
    )
    return _march_grid(kernel, T, h, model.init, coefficient_matrix(model), three, keep_fields, snapshots, "grid_exact")


def solve_qbm_zeroth(kernel, omega_m: float, T: float, h: float, method: str = "grid", keep_fields: bool = False) -> QbarSeries:
    """``X_1, X_2`` of ``Q-bar = X_1 q + X_2 p`` for the oscillator model."""
    from .models import build_qbm

    return _two_time(build_qbm(omega_m, 2), kernel, T, h, method, keep_fields)


def solve_n_fermion(kernel, A, T: float, h: float, method: str = "grid", keep_fields: bool = False) -> QbarSeries:
    """``X_1..X_N`` for N free fermionic modes coupled through ``L = sum a_j``."""
    from .models import build_n_fermion

    return _two_time(build_n_fermion(A), kernel, T, h, method, keep_fields)


def solve_bosonic_O(kernel, omega_1: float, omega_2: float, T: float, h: float, cap: int = THREE_TIME_CAP, keep_fields: bool = False, snapshots=()) -> QbarSeries:
    """``X_1..X_4`` and the noise integral ``X5(t, s')`` for two modes in a bosonic bath."""
    _check_cap(T, h, cap)
    w1, w2 = float(omega_1), float(omega_2)
    three = _ThreeTime(
        source=np.array([0, 0, -1j, -1j]),
        a=lambda x: x[0] + x[1],
        b=lambda X: 1j * (w1 + w2) + X[0] + X[1] + X[2] - X[3],
        boundary=lambda x: -1j * (2 * (x[1] - x[0]) + x[2] + x[3]),
    )
    return _march_grid(kernel, T, h, np.array([1, 1, 0, 0], dtype=complex), _boson_matrix(w1, w2), three, keep_fields, snapshots, "grid_exact")


def solve_for_model(model: ModelSpec, kernel, T: float, h: float, method: str = "grid") -> QbarSeries:
    """Dispatch to the solver that produces ``Q-bar`` coefficients for ``model``."""
    if model.name == "one_qubit":
        return solve_one_qubit(kernel, model.params["omega"], T, h, method)
    if model.name == "n_boson":
        p = model.params
        return solve_bosonic_O(kernel, p["omega_1"], p["omega_2"], T, h)
    if method == "closed_form":
        raise ConfigError("the closed-form path exists only for the one-qubit model")
    return _two_time(model, kernel, T, h, method)
