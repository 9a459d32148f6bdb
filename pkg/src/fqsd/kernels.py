"""Bath correlation kernels and kernel-weighted memory integrals.

All kernels are stationary: ``K(t, s)`` depends on ``tau = t - s`` only and
obeys ``K(s, t) = conj(K(t, s))``.  For ``tau >= 0`` each variant is given by
its closed form; negative lags are obtained from Hermitian symmetry.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "CorrelationKernel",
    "DiscreteModes",
    "SingleMode",
    "OrnsteinUhlenbeck",
    "OhmicZeroT",
    "eval_kernel",
    "weighted_integral",
    "kernel_from_dict",
]


def _check_finite(*values) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite kernel argument: {v!r}")


class CorrelationKernel:
    """Base class. Subclasses implement :meth:`_forward` for ``tau >= 0``."""

    def _forward(self, tau: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def lag(self, tau) -> np.ndarray | complex:
        """Kernel as a function of the lag ``tau = t - s`` (any sign)."""
        tau_arr = np.asarray(tau, dtype=float)
        _check_finite(tau_arr)
        out = self._forward(np.abs(tau_arr))
        out = np.where(tau_arr < 0, np.conj(out), out)
        return complex(out) if out.ndim == 0 else out

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        _check_finite(t, s)
        return self.lag(t - s)

    def lag_table(self, h: float, n: int, refine: int = 1) -> np.ndarray:
        """Kernel at the lattice offsets ``m * h / refine`` for ``m = 0..n*refine``.

        The two-time solvers only ever need ``K`` on this lattice, so one table
        replaces O(n^2) pointwise evaluations.
        """
        m = np.arange(n * refine + 1)
        return np.asarray(self._forward(m * (h / refine)), dtype=complex)

    def exponential_components(self) -> list[tuple[complex, complex]] | None:
        """``[(c_i, lam_i)]`` with ``K(tau) = sum c_i exp(-lam_i tau)`` for tau >= 0.

        ``None`` when the kernel is not a finite sum of exponentials.
        """
        return None

    def markov_rate(self) -> complex | None:
        """``int_0^inf K(tau) dtau`` when it exists in closed form."""
        comps = self.exponential_components()
        if comps is None:
            return None
        if any(lam.real <= 0 for _, lam in comps):
            return None
        return complex(sum(c / lam for c, lam in comps))


@dataclass(frozen=True)
class DiscreteModes(CorrelationKernel):
    """Finite set of bath modes, ``K(tau) = sum |g_i|^2 exp(-i w_i tau)``."""

    modes: tuple[tuple[complex, float], ...]

    def __post_init__(self):
        modes = tuple((complex(g), float(w)) for g, w in self.modes)
        if not modes:
            raise ValueError("DiscreteModes needs at least one mode")
        for g, w in modes:
            _check_finite(g, w)
        object.__setattr__(self, "modes", modes)

    def _forward(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.zeros(tau.shape, dtype=complex)
        for g, w in self.modes:
            out = out + abs(g) ** 2 * np.exp(-1j * w * tau)
        return out

    def exponential_components(self):
        return [(complex(abs(g) ** 2), 1j * w) for g, w in self.modes]


@dataclass(frozen=True)
class SingleMode(CorrelationKernel):
    """One bath mode of coupling ``g`` and frequency ``omega_b``."""

    g: complex
    omega_b: float

    def __post_init__(self):
        _check_finite(self.g, self.omega_b)

    def _forward(self, tau):
        return abs(self.g) ** 2 * np.exp(-1j * self.omega_b * np.asarray(tau, dtype=float))

    def exponential_components(self):
        return [(complex(abs(self.g) ** 2), 1j * float(self.omega_b))]

    def as_modes(self) -> DiscreteModes:
        return DiscreteModes(((self.g, self.omega_b),))


@dataclass(frozen=True)
class OrnsteinUhlenbeck(CorrelationKernel):
    """``K(tau) = (gamma/2) exp(-(gamma + i Omega) tau)`` for tau >= 0."""

    gamma: float
    Omega: float = 0.0

    def __post_init__(self):
        _check_finite(self.gamma, self.Omega)
        if self.gamma <= 0:
            raise ValueError("OrnsteinUhlenbeck requires gamma > 0")

    def _forward(self, tau):
        tau = np.asarray(tau, dtype=float)
        return 0.5 * self.gamma * np.exp(-(self.gamma + 1j * self.Omega) * tau)

    def exponential_components(self):
        return [(complex(0.5 * self.gamma), complex(self.gamma, self.Omega))]


@dataclass(frozen=True)
class OhmicZeroT(CorrelationKernel):
    """Zero-temperature Ohmic bath, ``K(tau) = Gamma / (1/omega_c + i tau)^2``."""

    Gamma: float
    omega_c: float

    def __post_init__(self):
        _check_finite(self.Gamma, self.omega_c)
        if self.Gamma <= 0 or self.omega_c <= 0:
            raise ValueError("OhmicZeroT requires Gamma > 0 and omega_c > 0")

    def _forward(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.Gamma / (1.0 / self.omega_c + 1j * tau) ** 2

    def markov_rate(self):
        return complex(-1j * self.Gamma * self.omega_c)


def eval_kernel(kernel: CorrelationKernel, t: float, s: float) -> complex:
    """Evaluate ``K(t, s)``."""
    return complex(kernel(t, s))


def weighted_integral(
    kernel: CorrelationKernel,
    t: float,
    field: Union[Sequence[complex], np.ndarray, Callable[[np.ndarray], np.ndarray]],
    h: float | None = None,
) -> complex:
    """Composite-trapezoid approximation of ``int_0^t K(t, s) field(s) ds``.

    Parameters
    ----------
    kernel : CorrelationKernel
    t : float
        Upper limit. ``t = 0`` gives 0.
    field : array_like or callable
        Either ``n + 1`` samples on the uniform grid ``s_j = j t / n`` or a
        callable evaluated on the grid of spacing ``h``.
    h : float, optional
        Grid spacing; required when ``field`` is callable and must divide ``t``.
    """
    if t == 0:
        return 0j
    if callable(field):
        if h is None:
            raise ValueError("h is required for a callable field")
        n = int(round(t / h))
        if n < 1 or abs(n * h - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"h={h} does not divide t={t}")
        s = np.linspace(0.0, t, n + 1)
        values = np.asarray(field(s), dtype=complex) * np.ones_like(s)
    else:
        values = np.asarray(field, dtype=complex)
        if values.size == 0:
            return 0j
        if values.size == 1:
            raise ValueError("a nonzero range needs at least two samples")
        s = np.linspace(0.0, t, values.size)
    k = np.asarray(kernel(t, s), dtype=complex)
    step = s[1] - s[0]
    y = k * values
    return complex(step * (y.sum() - 0.5 * (y[0] + y[-1])))


def kernel_from_dict(block: dict) -> CorrelationKernel:
    """Build a kernel from a config block such as ``{type: ou, gamma: 2}``."""
    from .errors import ConfigError

    block = dict(block)
    kind = str(block.pop("type", "")).lower()
    try:
        if kind == "ou":
            return OrnsteinUhlenbeck(float(block["gamma"]), float(block.get("Omega", 0.0)))
        if kind == "ohmic":
            return OhmicZeroT(float(block["Gamma"]), float(block["omega_c"]))
        if kind == "single_mode":
            return SingleMode(_as_complex(block["g"]), float(block["omega_b"]))
        if kind == "modes":
            return DiscreteModes(tuple((_as_complex(g), float(w)) for g, w in block["modes"]))
    except KeyError as exc:
        raise ConfigError(f"kernel block '{kind}' is missing parameter {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid kernel block: {exc}") from None
    raise ConfigError(f"unknown kernel type {kind!r}; expected ou, ohmic, single_mode or modes")


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        re, im = value
        return complex(float(re), float(im))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)
