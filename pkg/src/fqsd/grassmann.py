"""Exact finite Grassmann algebra and micro-scale stochastic propagation.

For ``M`` bath modes the algebra has ``2M`` generators.  Generator ``2i`` is
``xi_i`` and ``2i + 1`` is ``xi_i^*``; a monomial is a bitmask whose set bits
are read in ascending order.  Elements store one complex coefficient per
bitmask.

The stochastic state ``psi_t(xi^*)`` is a system vector whose amplitudes are
Grassmann elements.  ``P_t = |psi_t(xi^*)><psi_t(-xi)|`` is averaged with the
Gaussian-weighted Berezin integral to give the reduced density matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .models import ModelSpec

__all__ = [
    "GrassmannElement",
    "GrassmannState",
    "StochasticDensity",
    "xi",
    "xi_star",
    "mul",
    "left_derivative",
    "statistical_mean",
    "berezin_mean",
    "MicroTrajectory",
    "micro_qsd_propagate",
    "novikov_check",
    "recovery_check",
]


def _popcount(x: int) -> int:
    return bin(x).count("1")


@lru_cache(maxsize=None)
def _product_table(n_gen: int):
    """Result mask and sign for every pair of monomials (0 sign = annihilated)."""
    size = 1 << n_gen
    sign = np.zeros((size, size), dtype=np.int8)
    for a in range(size):
        for b in range(size):
            if a & b:
                continue
            # each generator of b moves left past the larger generators of a
            swaps = sum(_popcount(a >> (g + 1)) for g in range(n_gen) if b >> g & 1)
            sign[a, b] = -1 if swaps % 2 else 1
    result = np.bitwise_or.outer(np.arange(size), np.arange(size))
    return sign, result


@lru_cache(maxsize=None)
def _conjugation_table(n_gen: int):
    """Mask map and sign of ``conj(g_1 ... g_k) = g_k^* ... g_1^*`` in canonical order."""
    size = 1 << n_gen
    target = np.zeros(size, dtype=np.int64)
    sign = np.ones(size, dtype=np.int8)
    for mask in range(size):
        gens = [g for g in range(n_gen) if mask >> g & 1]
        image = [g ^ 1 for g in reversed(gens)]
        inversions = sum(1 for i in range(len(image)) for j in range(i + 1, len(image)) if image[i] > image[j])
        target[mask] = sum(1 << g for g in image)
        sign[mask] = -1 if inversions % 2 else 1
    return target, sign


@dataclass(frozen=True, eq=False)
class GrassmannElement:
    """Element of the Grassmann algebra on ``n_gen`` generators."""

    n_gen: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (1 << self.n_gen,):
            raise ValueError(f"need {1 << self.n_gen} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def scalar(cls, n_gen: int, value: complex = 1.0) -> "GrassmannElement":
        c = np.zeros(1 << n_gen, dtype=complex)
        c[0] = value
        return cls(n_gen, c)

    @classmethod
    def generator(cls, n_gen: int, gen: int) -> "GrassmannElement":
        if not 0 <= gen < n_gen:
            raise ValueError(f"generator id {gen} out of range for {n_gen} generators")
        c = np.zeros(1 << n_gen, dtype=complex)
        c[1 << gen] = 1
        return cls(n_gen, c)

    @property
    def body(self) -> complex:
        """Grade-0 coefficient."""
        return complex(self.coeffs[0])

    def grade_part(self, grade: int) -> "GrassmannElement":
        keep = np.array([_popcount(m) == grade for m in range(self.coeffs.size)])
        return GrassmannElement(self.n_gen, np.where(keep, self.coeffs, 0))

    def parity(self) -> int | None:
        """0 for even, 1 for odd, None for mixed or zero elements."""
        grades = {_popcount(m) % 2 for m in np.flatnonzero(self.coeffs)}
        return grades.pop() if len(grades) == 1 else None

    def _check(self, other: "GrassmannElement") -> None:
        if other.n_gen != self.n_gen:
            raise ValueError(f"generator count mismatch: {self.n_gen} vs {other.n_gen}")

    def __add__(self, other):
        if isinstance(other, GrassmannElement):
            self._check(other)
            return GrassmannElement(self.n_gen, self.coeffs + other.coeffs)
        return self + GrassmannElement.scalar(self.n_gen, other)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.n_gen, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return mul(self, other)
        return GrassmannElement(self.n_gen, self.coeffs * other)

    def __rmul__(self, other):
        return GrassmannElement(self.n_gen, other * self.coeffs)

    def allclose(self, other: "GrassmannElement", atol: float = 1e-12) -> bool:
        return self.n_gen == other.n_gen and np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=0)

    def conjugate(self) -> "GrassmannElement":
        """Swap ``xi_i <-> xi_i^*``, reverse products and conjugate coefficients."""
        return GrassmannElement(self.n_gen, _conjugate_array(self.coeffs, self.n_gen))

    def negate_unstarred(self) -> "GrassmannElement":
        """Substitute ``xi_i -> -xi_i`` (the starred generators are untouched)."""
        return GrassmannElement(self.n_gen, self.coeffs * _unstarred_signs(self.n_gen))

    def __repr__(self) -> str:
        terms = [f"({c:.6g})*{_mask_name(m)}" for m, c in enumerate(self.coeffs) if c != 0]
        return " + ".join(terms) if terms else "0"


def _mask_name(mask: int) -> str:
    if mask == 0:
        return "1"
    names = []
    for g in range(mask.bit_length()):
        if mask >> g & 1:
            names.append(f"xi{g // 2 + 1}" + ("*" if g % 2 else ""))
    return "".join(names)


def xi(n_modes: int, i: int) -> GrassmannElement:
    """Generator ``xi_i`` (``i`` counts from 0)."""
    return GrassmannElement.generator(2 * n_modes, 2 * i)


def xi_star(n_modes: int, i: int) -> GrassmannElement:
    """Generator ``xi_i^*`` (``i`` counts from 0)."""
    return GrassmannElement.generator(2 * n_modes, 2 * i + 1)


def _mul_arrays(a: np.ndarray, b: np.ndarray, n_gen: int) -> np.ndarray:
    """Grassmann product over the last axis, broadcasting leading axes."""
    sign, result = _product_table(n_gen)
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape, dtype=complex)
    ia, ib = np.nonzero(sign)
    for i, j in zip(ia, ib):
        out[..., result[i, j]] += sign[i, j] * a[..., i] * b[..., j]
    return out


def mul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Grassmann product ``a b``."""
    a._check(b)
    return GrassmannElement(a.n_gen, _mul_arrays(a.coeffs, b.coeffs, a.n_gen))


def _derivative_array(c: np.ndarray, gen: int, n_gen: int) -> np.ndarray:
    out = np.zeros_like(c)
    bit = 1 << gen
    below = bit - 1
    for mask in range(1 << n_gen):
        if mask & bit:
            s = -1 if _popcount(mask & below) % 2 else 1
            out[..., mask ^ bit] += s * c[..., mask]
    return out


def left_derivative(a: GrassmannElement, gen: int) -> GrassmannElement:
    """Left derivative with respect to generator ``gen``."""
    if not 0 <= gen < a.n_gen:
        raise ValueError(f"generator id {gen} out of range")
    return GrassmannElement(a.n_gen, _derivative_array(a.coeffs, gen, a.n_gen))


def _conjugate_array(c: np.ndarray, n_gen: int) -> np.ndarray:
    target, sign = _conjugation_table(n_gen)
    out = np.zeros_like(c)
    out[..., target] = sign * np.conj(c)
    return out


@lru_cache(maxsize=None)
def _unstarred_signs(n_gen: int) -> np.ndarray:
    even_bits = sum(1 << g for g in range(0, n_gen, 2))
    return np.array([-1 if _popcount(m & even_bits) % 2 else 1 for m in range(1 << n_gen)])


@lru_cache(maxsize=None)
def _mean_functional(n_gen: int) -> np.ndarray:
    """``w[mask]`` = Gaussian-weighted Berezin integral of the monomial ``mask``.

    The weight is ``exp(-sum xi_i^* xi_i) = prod (1 - xi_i^* xi_i)`` and the
    measure ``prod_i d xi_i^* d xi_i`` acts as left derivatives applied from
    the last mode inwards: d/dxi_M first, d/dxi_1^* last.
    """
    n_modes = n_gen // 2
    weight = GrassmannElement.scalar(n_gen)
    for i in range(n_modes):
        weight = weight * (1 - xi_star(n_modes, i) * xi(n_modes, i))
    order = []
    for i in reversed(range(n_modes)):
        order += [2 * i, 2 * i + 1]
    w = np.zeros(1 << n_gen)
    for mask in range(1 << n_gen):
        mono = GrassmannElement(n_gen, np.eye(1 << n_gen)[mask])
        e = weight * mono
        for g in order:
            e = left_derivative(e, g)
        w[mask] = e.body.real
    return w


def berezin_mean(a: GrassmannElement) -> complex:
    """Statistical mean of a single element."""
    return complex(a.coeffs @ _mean_functional(a.n_gen))


@dataclass(frozen=True)
class GrassmannState:
    """System vector with Grassmann amplitudes, ``amps[a, mask]``."""

    n_modes: int
    amps: np.ndarray
    time: float = 0.0

    @property
    def n_gen(self) -> int:
        return 2 * self.n_modes

    def amplitude(self, a: int) -> GrassmannElement:
        return GrassmannElement(self.n_gen, self.amps[a])

    def density(self) -> "StochasticDensity":
        """``P = |psi(xi^*)><psi(-xi)|``."""
        bra = _conjugate_array(self.amps, self.n_gen) * _unstarred_signs(self.n_gen)
        P = _mul_arrays(self.amps[:, None, :], bra[None, :, :], self.n_gen)
        return StochasticDensity(self.n_modes, P)


@dataclass(frozen=True)
class StochasticDensity:
    """Matrix of Grassmann elements, ``entries[a, b, mask]``."""

    n_modes: int
    entries: np.ndarray

    @property
    def n_gen(self) -> int:
        return 2 * self.n_modes

    def element(self, a: int, b: int) -> GrassmannElement:
        return GrassmannElement(self.n_gen, self.entries[a, b])

    def left_multiply(self, g: GrassmannElement) -> "StochasticDensity":
        return StochasticDensity(self.n_modes, _mul_arrays(g.coeffs, self.entries, self.n_gen))

    def right_multiply(self, g: GrassmannElement) -> "StochasticDensity":
        return StochasticDensity(self.n_modes, _mul_arrays(self.entries, g.coeffs, self.n_gen))


def statistical_mean(P) -> np.ndarray:
    """Entrywise Gaussian-weighted Berezin integral of a stochastic density."""
    if isinstance(P, GrassmannElement):
        return np.array(berezin_mean(P))
    return P.entries @ _mean_functional(P.n_gen)


def _operator_matrix(n_gen: int, action) -> np.ndarray:
    """Matrix of a linear map on coefficient vectors."""
    size = 1 << n_gen
    return np.column_stack([action(np.eye(size)[m]) for m in range(size)])


@dataclass
class MicroTrajectory:
    times: np.ndarray
    amps: np.ndarray  # (n_samples, dim, 2^n_gen)
    n_modes: int

    def state(self, k: int) -> GrassmannState:
        return GrassmannState(self.n_modes, self.amps[k], float(self.times[k]))

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9:
            raise ValueError(f"time {t} is not on the propagation grid")
        return k

    def density_matrices(self) -> np.ndarray:
        return np.array([statistical_mean(self.state(k).density()) for k in range(len(self.times))])


def _noise_elements(modes, n_modes, t):
    """``xi_t^*`` and ``xi_t`` at time ``t``."""
    n_gen = 2 * n_modes
    star = GrassmannElement.scalar(n_gen, 0)
    plain = GrassmannElement.scalar(n_gen, 0)
    for i, (g, w) in enumerate(modes):
        star = star + (-1j * np.conj(g) * np.exp(1j * w * t)) * xi_star(n_modes, i)
        plain = plain + (1j * g * np.exp(-1j * w * t)) * xi(n_modes, i)
    return star, plain


def micro_qsd_propagate(model: ModelSpec, modes: Sequence[tuple[complex, float]], psi0, T: float, h: float = 1e-3) -> MicroTrajectory:
    """Propagate ``psi_t(xi^*)`` exactly in the Grassmann algebra with RK4.

    ``d psi/dt = [-i H + L xi_t^* - i L^+ sum_i g_i e^{-i w_i t} d/dxi_i^*] psi``
    with ``xi_t^* = -i sum_i conj(g_i) e^{i w_i t} xi_i^*``; the bath starts in vacuum.
    """
    from .qops import _grid_size

    modes = [(complex(g), float(w)) for g, w in modes]
    M = len(modes)
    if not 1 <= M <= 2:
        raise ConfigError(f"micro propagation supports 1 or 2 modes, got {M}")
    n_gen = 2 * M
    size = 1 << n_gen
    n = _grid_size(T, h)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (model.dim,):
        raise ConfigError(f"psi0 must have shape ({model.dim},)")
    mult = [_operator_matrix(n_gen, lambda c, i=i: _mul_arrays(xi_star(M, i).coeffs, c, n_gen)) for i in range(M)]
    deriv = [_operator_matrix(n_gen, lambda c, i=i: _derivative_array(c, 2 * i + 1, n_gen)) for i in range(M)]
    H, L = model.H, model.L
    Ld = L.conj().T

    def f(t, psi):
        noise = sum(-1j * np.conj(g) * np.exp(1j * w * t) * mult[i] for i, (g, w) in enumerate(modes))
        grad = sum(g * np.exp(-1j * w * t) * deriv[i] for i, (g, w) in enumerate(modes))
        return -1j * (H @ psi) + (L @ psi) @ noise.T - 1j * (Ld @ psi) @ grad.T

    amps = np.zeros((n + 1, model.dim, size), dtype=complex)
    amps[0, :, 0] = psi0
    psi = amps[0]
    for k in range(n):
        t = k * h
        k1 = f(t, psi)
        k2 = f(t + 0.5 * h, psi + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, psi + 0.5 * h * k2)
        k4 = f(t + h, psi + h * k3)
        psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        amps[k + 1] = psi
    return MicroTrajectory(np.linspace(0.0, n * h, n + 1), amps, M)


def novikov_check(model: ModelSpec, modes, T: float, sample_times, h: float = 1e-3, psi0=None) -> dict:
    """Residuals of ``<P xi_t> = -<Qbar P>`` and ``<xi_t^* P> = <P Qbar^+>``.

    Only the one-qubit model is supported: its ``Qbar = X_1(t) sigma_minus`` does
    not depend on the noise.  ``X_1`` comes from the exponential-kernel shortcut.
    """
    from .kernels import DiscreteModes
    from .qops import solve_one_qubit

    if model.name != "one_qubit":
        raise ConfigError("the Novikov check is implemented for the one-qubit model only")
    modes = [(complex(g), float(w)) for g, w in modes]
    if psi0 is None:
        psi0 = np.array([1, 1], dtype=complex) / np.sqrt(2)
    traj = micro_qsd_propagate(model, modes, psi0, T, h)
    series = solve_one_qubit(DiscreteModes(tuple(modes)), model.params["omega"], T, h, method="riccati")
    first, second = [], []
    for t in sample_times:
        k = traj.index(t)
        P = traj.state(k).density()
        qbar = model.assemble(series.coeffs[k])
        star, plain = _noise_elements(modes, len(modes), traj.times[k])
        rho = statistical_mean(P)
        lhs1 = statistical_mean(P.right_multiply(plain))
        rhs1 = -qbar @ rho
        lhs2 = statistical_mean(P.left_multiply(star))
        rhs2 = rho @ qbar.conj().T
        first.append(float(np.max(np.abs(lhs1 - rhs1))))
        second.append(float(np.max(np.abs(lhs2 - rhs2))))
    return {"times": list(map(float, sample_times)), "first": first, "second": second, "max": max(first + second)}


def recovery_check(model: ModelSpec, modes, psi0, T: float, sample_times, h: float = 1e-3) -> dict:
    """Compare ``<P_t>_s`` with the exact-diagonalization partial trace."""
    from .oracle import CompositeSpec, exact_evolve, vacuum_product

    traj = micro_qsd_propagate(model, modes, psi0, T, h)
    spec = CompositeSpec(model, tuple(modes))
    exact = exact_evolve(spec, vacuum_product(spec, psi0), T, h)
    devs = []
    for t in sample_times:
        k = traj.index(t)
        rho = statistical_mean(traj.state(k).density())
        devs.append(float(np.max(np.abs(rho - exact.rhos[k]))))
    return {"times": list(map(float, sample_times)), "deviation": devs, "max": max(devs)}
