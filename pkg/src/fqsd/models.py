"""System-side definitions: Hamiltonian, coupling operator and Q-ansatz basis.

Conventions
-----------
* Qubits use the basis ``{|e>, |g>}``; ``sigma_minus = |g><e|`` and
  ``sigma_z = diag(1, -1)``.  Two-qubit states are ordered ``ee, eg, ge, gg``.
* Fermionic modes use the occupation basis ``{|0>, |1>}`` with Jordan-Wigner
  strings on preceding modes.
* QBM quadratures satisfy ``[q, p] = i`` on the untruncated Fock space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "ModelSpec",
    "ChainBathSpec",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
    "SIGMA_Z",
    "build_one_qubit",
    "build_two_qubit",
    "build_qbm",
    "build_n_fermion",
    "build_n_boson",
    "jordan_wigner_annihilators",
    "chain_bath_modes",
    "model_from_dict",
]

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable description of one system model.

    Attributes
    ----------
    name : str
        ``one_qubit``, ``two_qubit``, ``qbm``, ``n_fermion`` or ``n_boson``.
    H : ndarray
        System Hamiltonian.
    L : ndarray
        Coupling operator.
    q_basis : tuple of ndarray
        Operators spanning the Q ansatz.
    init : ndarray
        Coefficient values on the diagonal ``s = t``; ``sum(init * q_basis) = L``.
    params : dict
        Parameters the model was built from.
    operators : dict
        Named operators used by observables.
    """

    name: str
    H: np.ndarray
    L: np.ndarray
    q_basis: tuple
    init: np.ndarray
    params: dict = field(default_factory=dict)
    operators: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def basis_len(self) -> int:
        return len(self.init)

    def assemble(self, coeffs: Sequence[complex]) -> np.ndarray:
        """``sum_i coeffs[i] * q_basis[i]`` over the first ``len(coeffs)`` entries."""
        out = np.zeros_like(self.L)
        for c, q in zip(coeffs, self.q_basis):
            out = out + c * q
        return out


@dataclass(frozen=True)
class ChainBathSpec:
    """Effective fermionic modes of an XX spin chain after Jordan-Wigner + Fourier."""

    N: int
    boundary: str
    modes: tuple[tuple[complex, float], ...]

    @property
    def couplings(self) -> np.ndarray:
        return np.array([g for g, _ in self.modes])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([w for _, w in self.modes])


def _finite(**values) -> None:
    for name, v in values.items():
        if not np.all(np.isfinite(np.asarray(v, dtype=complex))):
            raise ConfigError(f"parameter {name} must be finite, got {v!r}")


def build_one_qubit(omega: float) -> ModelSpec:
    """Two-level system ``H = (omega/2) sigma_z`` coupled through ``sigma_minus``."""
    _finite(omega=omega)
    omega = float(omega)
    return ModelSpec(
        name="one_qubit",
        H=0.5 * omega * SIGMA_Z,
        L=SIGMA_MINUS.copy(),
        q_basis=(SIGMA_MINUS.copy(),),
        init=np.array([1.0 + 0j]),
        params={"omega": omega},
        operators={"sigma_minus": SIGMA_MINUS, "sigma_plus": SIGMA_PLUS, "sigma_z": SIGMA_Z},
    )


def build_two_qubit(
    omega_A: float = 1.0,
    omega_B: float = 1.0,
    J_xy: float = 0.0,
    J_z: float = 0.0,
    kappa_A: float = 1.0,
    kappa_B: float = 1.0,
) -> ModelSpec:
    """Two coupled qubits sharing one bath, ``L = kA sA- + kB sB-``."""
    _finite(omega_A=omega_A, omega_B=omega_B, J_xy=J_xy, J_z=J_z, kappa_A=kappa_A, kappa_B=kappa_B)
    sm_a = np.kron(SIGMA_MINUS, I2)
    sm_b = np.kron(I2, SIGMA_MINUS)
    sz_a = np.kron(SIGMA_Z, I2)
    sz_b = np.kron(I2, SIGMA_Z)
    sp_a, sp_b = sm_a.conj().T, sm_b.conj().T
    H = (
        omega_A * sz_a
        + omega_B * sz_b
        + J_xy * (sp_a @ sm_b + sm_a @ sp_b)
        + J_z * (sz_a @ sz_b)
    )
    L = kappa_A * sm_a + kappa_B * sm_b
    q_basis = (sm_a, sm_b, sz_a @ sm_b, sz_b @ sm_a, 2.0 * sm_a @ sm_b)
    params = dict(omega_A=omega_A, omega_B=omega_B, J_xy=J_xy, J_z=J_z, kappa_A=kappa_A, kappa_B=kappa_B)
    return ModelSpec(
        name="two_qubit",
        H=H.astype(complex),
        L=L.astype(complex),
        q_basis=q_basis,
        init=np.array([kappa_A, kappa_B, 0.0, 0.0], dtype=complex),
        params={k: float(v) for k, v in params.items()},
        operators={"sigma_minus_A": sm_a, "sigma_minus_B": sm_b, "sigma_z_A": sz_a, "sigma_z_B": sz_b},
    )


def _ladder(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max)), k=1).astype(complex)


def build_qbm(omega_m: float, n_max: int = 30) -> ModelSpec:
    """Harmonic oscillator ``H = omega_m (p^2 + q^2)`` coupled through ``q``."""
    _finite(omega_m=omega_m)
    if int(n_max) != n_max or n_max < 2:
        raise ConfigError(f"n_max must be an integer >= 2, got {n_max!r}")
    n_max = int(n_max)
    a = _ladder(n_max)
    ad = a.conj().T
    q = (a + ad) / np.sqrt(2.0)
    p = (a - ad) / (1j * np.sqrt(2.0))
    H = omega_m * (p @ p + q @ q)
    return ModelSpec(
        name="qbm",
        H=0.5 * (H + H.conj().T),
        L=q.copy(),
        q_basis=(q, p),
        init=np.array([1.0, 0.0], dtype=complex),
        params={"omega_m": float(omega_m), "n_max": n_max},
        operators={"q": q, "p": p, "a": a, "n": ad @ a},
    )


def jordan_wigner_annihilators(n_modes: int) -> list[np.ndarray]:
    """Annihilators ``a_j = Z x ... x Z x |0><1| x I x ... x I``."""
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    ops = []
    for j in range(n_modes):
        factors = [z] * j + [lower] + [I2] * (n_modes - j - 1)
        op = factors[0]
        for f in factors[1:]:
            op = np.kron(op, f)
        ops.append(op)
    return ops


def build_n_fermion(A: Sequence[float]) -> ModelSpec:
    """Free fermionic modes ``H = sum A_j n_j`` coupled through ``L = sum a_j``."""
    A = [float(x) for x in A]
    if not 1 <= len(A) <= 6:
        raise ConfigError(f"n_fermion supports 1..6 modes, got {len(A)}")
    _finite(A=A)
    a = jordan_wigner_annihilators(len(A))
    H = sum(Aj * (aj.conj().T @ aj) for Aj, aj in zip(A, a))
    ops = {f"a{j + 1}": aj for j, aj in enumerate(a)}
    ops.update({f"n{j + 1}": aj.conj().T @ aj for j, aj in enumerate(a)})
    return ModelSpec(
        name="n_fermion",
        H=np.asarray(H, dtype=complex),
        L=sum(a),
        q_basis=tuple(a),
        init=np.ones(len(A), dtype=complex),
        params={"A": A},
        operators=ops,
    )


def build_n_boson(omega_1: float, omega_2: float) -> ModelSpec:
    """Two fermionic modes whose bath is bosonic (the O-operator comparison model).

    The system is the same as ``build_n_fermion([omega_1, omega_2])``; the
    ansatz basis gains ``a1^+ a1 a2``, ``a2^+ a1 a2`` and ``a1 a2``.
    """
    base = build_n_fermion([omega_1, omega_2])
    a1, a2 = base.q_basis
    extra = (a1.conj().T @ a1 @ a2, a2.conj().T @ a1 @ a2, a1 @ a2)
    return ModelSpec(
        name="n_boson",
        H=base.H,
        L=base.L,
        q_basis=base.q_basis + extra,
        init=np.array([1.0, 1.0, 0.0, 0.0], dtype=complex),
        params={"omega_1": float(omega_1), "omega_2": float(omega_2)},
        operators=base.operators,
    )


def chain_bath_modes(N: int, boundary: str = "periodic") -> ChainBathSpec:
    """Effective modes seen by a system coupled to the first site of an XX chain.

    ``periodic`` uses the N momenta ``phi_p = 2 pi p / N`` with
    ``g_p = exp(-i phi_p) / sqrt(N)`` and ``omega_p = 2 cos(phi_p)``.
    ``open`` uses the standing waves ``phi_p = pi p / (N + 1)``.
    """
    if int(N) != N or N < 2:
        raise ConfigError(f"chain length must be an integer >= 2, got {N!r}")
    N = int(N)
    if boundary == "periodic":
        phi = 2 * np.pi * np.arange(N) / N
        g = np.exp(-1j * phi) / np.sqrt(N)
    elif boundary == "open":
        phi = np.pi * np.arange(1, N + 1) / (N + 1)
        g = np.sqrt(2.0 / (N + 1)) * np.sin(phi) + 0j
    else:
        raise ConfigError(f"unknown boundary {boundary!r}")
    modes = tuple((complex(gp), float(2 * np.cos(ph))) for gp, ph in zip(g, phi))
    return ChainBathSpec(N=N, boundary=boundary, modes=modes)


_MODEL_KEYS = {
    "one_qubit": ("omega",),
    "two_qubit": ("omega_A", "omega_B", "J_xy", "J_z", "kappa_A", "kappa_B"),
    "qbm": ("omega_m", "n_max"),
    "n_fermion": ("A",),
    "n_boson": ("omega_1", "omega_2"),
}


def model_from_dict(block: dict) -> ModelSpec:
    """Build a model from a config block such as ``{model: qbm, omega_m: 1}``."""
    block = dict(block)
    kind = str(block.pop("model", block.pop("type", ""))).lower()
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown model {kind!r}; expected one of {sorted(_MODEL_KEYS)}")
    unknown = set(block) - set(_MODEL_KEYS[kind])
    if unknown:
        raise ConfigError(f"unknown parameters for {kind}: {sorted(unknown)}")
    try:
        if kind == "one_qubit":
            return build_one_qubit(float(block.get("omega", 1.0)))
        if kind == "two_qubit":
            return build_two_qubit(**{k: float(v) for k, v in block.items()})
        if kind == "qbm":
            return build_qbm(float(block.get("omega_m", 1.0)), block.get("n_max", 30))
        if kind == "n_fermion":
            return build_n_fermion(block["A"])
        return build_n_boson(float(block["omega_1"]), float(block["omega_2"]))
    except KeyError as exc:
        raise ConfigError(f"model {kind} is missing parameter {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid model block: {exc}") from None
