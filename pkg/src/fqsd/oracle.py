"""Exact reference dynamics by dense diagonalization of system plus bath.

Bath modes are fermions built by Jordan-Wigner on the bath register only, so
system operators act as ``S x I`` and commute with every bath operator.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import ConfigError
from .master import Trajectory
from .models import ModelSpec, chain_bath_modes, jordan_wigner_annihilators

__all__ = [
    "CompositeSpec",
    "vacuum_product",
    "exact_evolve",
    "partial_trace_bath",
    "xx_chain_hamiltonian",
    "free_fermion_hamiltonian",
    "chain_equivalence",
]

MAX_TOTAL_DIM = 4096


@dataclass(frozen=True, eq=False)
class CompositeSpec:
    """System model coupled to discrete fermionic modes ``(g_i, w_i)``.

    ``H = H_s + sum w_i c_i^+ c_i + sum (conj(g_i) c_i^+ L + g_i L^+ c_i)``.
    """

    system: ModelSpec
    bath_modes: tuple

    def __post_init__(self):
        modes = tuple((complex(g), float(w)) for g, w in self.bath_modes)
        if not 1 <= len(modes) <= 8:
            raise ConfigError(f"oracle supports 1..8 bath modes, got {len(modes)}")
        object.__setattr__(self, "bath_modes", modes)
        if self.total_dim > MAX_TOTAL_DIM:
            raise ConfigError(f"total dimension {self.total_dim} exceeds {MAX_TOTAL_DIM}")

    @property
    def bath_dim(self) -> int:
        return 2 ** len(self.bath_modes)

    @property
    def total_dim(self) -> int:
        return self.system.dim * self.bath_dim

    def bath_operators(self) -> list[np.ndarray]:
        eye = np.eye(self.system.dim)
        return [np.kron(eye, c) for c in jordan_wigner_annihilators(len(self.bath_modes))]

    def lift(self, op: np.ndarray) -> np.ndarray:
        return np.kron(op, np.eye(self.bath_dim))

    def hamiltonian(self) -> np.ndarray:
        cs = self.bath_operators()
        L = self.lift(self.system.L)
        Ld = L.conj().T
        H = self.lift(self.system.H)
        for (g, w), c in zip(self.bath_modes, cs):
            cd = c.conj().T
            H = H + w * cd @ c + np.conj(g) * cd @ L + g * Ld @ c
        return H


def vacuum_product(spec: CompositeSpec, psi_sys) -> np.ndarray:
    """``psi_sys x |vac>`` with every bath mode empty."""
    vac = np.zeros(spec.bath_dim, dtype=complex)
    vac[0] = 1
    psi_sys = np.asarray(psi_sys, dtype=complex)
    return np.kron(psi_sys / np.linalg.norm(psi_sys), vac)


def partial_trace_bath(psi: np.ndarray, d_sys: int, d_bath: int) -> np.ndarray:
    m = psi.reshape(d_sys, d_bath)
    return m @ m.conj().T


def exact_evolve(spec: CompositeSpec, psi0, T: float, sample_h: float) -> Trajectory:
    """Reduced system states at ``t = k * sample_h`` for ``0 <= t <= T``."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (spec.total_dim,):
        raise ConfigError(f"state must have length {spec.total_dim}")
    if abs(np.linalg.norm(psi0) - 1) > 1e-12:
        raise ConfigError("initial state must be normalized")
    n = int(round(T / sample_h))
    times = np.linspace(0.0, n * sample_h, n + 1)
    energies, vecs = np.linalg.eigh(spec.hamiltonian())
    amps = vecs.conj().T @ psi0
    states = (vecs[None, :, :] * (np.exp(-1j * np.outer(times, energies)) * amps)[:, None, :]).sum(axis=2)
    m = states.reshape(len(times), spec.system.dim, spec.bath_dim)
    rhos = np.einsum("kab,kcb->kac", m, m.conj())
    traj = Trajectory(times, rhos)
    traj.observables["norm"] = np.linalg.norm(states, axis=1)
    return traj


def xx_chain_hamiltonian(N: int, boundary: str = "periodic") -> np.ndarray:
    """``sum_i (s_i^+ s_{i+1}^- + h.c.)`` on N spins; periodic bonds wrap around."""
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    eye = np.eye(2)

    def site(op, i):
        out = np.ones((1, 1))
        for j in range(N):
            out = np.kron(out, op if j == i else eye)
        return out

    bonds = [(i, i + 1) for i in range(N - 1)]
    if boundary == "periodic":
        bonds.append((N - 1, 0))
    H = np.zeros((2**N, 2**N), dtype=complex)
    for i, j in bonds:
        term = site(sp, i) @ site(sp.conj().T, j)
        H += term + term.conj().T
    return H


def free_fermion_hamiltonian(frequencies) -> np.ndarray:
    """``sum_p w_p a_p^+ a_p`` in the Jordan-Wigner Fock basis."""
    a = jordan_wigner_annihilators(len(frequencies))
    return sum(w * op.conj().T @ op for w, op in zip(frequencies, a))


def _number_sector(N: int, n: int) -> np.ndarray:
    counts = np.array([bin(b).count("1") for b in range(2**N)])
    return np.flatnonzero(counts == n)


def chain_equivalence(N: int, excitations: Optional[int] = None, boundary: str = "periodic") -> float:
    """Max sorted-eigenvalue gap between the XX chain and its effective free fermions.

    ``excitations=None`` compares the full 2^N spectra; an integer restricts
    both Hamiltonians to that number of excitations (both conserve it).
    """
    if N > 10:
        raise ConfigError("chain_equivalence supports N <= 10")
    chain = xx_chain_hamiltonian(N, boundary)
    free = free_fermion_hamiltonian(chain_bath_modes(N, boundary).frequencies)
    if excitations is not None:
        idx = _number_sector(N, excitations)
        chain = chain[np.ix_(idx, idx)]
        free = free[np.ix_(idx, idx)]
    e1 = np.linalg.eigvalsh(chain)
    e2 = np.linalg.eigvalsh(free)
    return float(np.max(np.abs(e1 - e2)))


def many_body_levels(single_particle, n: int) -> np.ndarray:
    """Sorted sums of ``n`` distinct single-particle energies."""
    return np.sort([sum(c) for c in combinations(single_particle, n)])
