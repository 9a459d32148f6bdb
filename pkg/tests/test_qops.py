import numpy as np
import pytest

from fqsd.errors import ConfigError
from fqsd.grassmann import _derivative_array, _mul_arrays, micro_qsd_propagate, xi_star
from fqsd.kernels import DiscreteModes, OhmicZeroT, OrnsteinUhlenbeck, SingleMode, weighted_integral
from fqsd.models import build_n_fermion, build_one_qubit, build_qbm, build_two_qubit
from fqsd.qops import (
    coefficient_matrix,
    solve_bosonic_O,
    solve_n_fermion,
    solve_one_qubit,
    solve_qbm_zeroth,
    solve_two_qubit_exact,
    solve_two_qubit_zeroth,
)

TWO_QUBIT = dict(omega_A=0.7, omega_B=1.1, J_xy=0.4, J_z=0.3, kappa_A=1.0, kappa_B=0.6)
SYMMETRIC = dict(omega_A=1.0, omega_B=1.0, J_xy=0.5, J_z=0.2, kappa_A=1.0, kappa_B=1.0)


def project(op, basis):
    """Least-squares coefficients of ``op`` in the span of ``basis`` and the residual."""
    A = np.column_stack([b.reshape(-1) for b in basis])
    coef, *_ = np.linalg.lstsq(A, op.reshape(-1), rcond=None)
    return coef, np.max(np.abs(A @ coef - op.reshape(-1)))


def noise_free_flow(model, X, nb):
    """Columns of the projected map x -> [-iH - L^+ Qbar, sum x_i q_i]."""
    qbar = model.assemble(X)
    gen = -1j * model.H - model.L.conj().T @ qbar
    cols = []
    for q in model.q_basis[:nb]:
        coef, resid = project(gen @ q - q @ gen, model.q_basis[:nb])
        assert resid < 1e-12
        cols.append(coef)
    return np.column_stack(cols)


@pytest.mark.parametrize(
    "model",
    [build_one_qubit(1.3), build_n_fermion([2.0, 1.0, 0.4]), build_two_qubit(**TWO_QUBIT)],
    ids=lambda m: m.name,
)
def test_coefficient_equations_match_operator_projection(model):
    rng = np.random.default_rng(3)
    nb = model.basis_len
    X = rng.normal(size=nb) + 1j * rng.normal(size=nb)
    assert np.allclose(coefficient_matrix(model)(X), noise_free_flow(model, X, nb), atol=1e-12)


def test_qbm_equations_match_projection_on_low_fock_block():
    model = build_qbm(0.8, 24)
    X = np.array([0.3 - 0.7j, -0.2 + 0.4j])
    gen = -1j * model.H - model.L.conj().T @ model.assemble(X)
    M = coefficient_matrix(model)(X)
    cut = 12
    basis = [q[:cut, :cut] for q in model.q_basis]
    for col, q in enumerate(model.q_basis):
        c = (gen @ q - q @ gen)[:cut, :cut]
        coef, resid = project(c, basis)
        assert resid < 1e-12
        assert np.allclose(coef, M[:, col], atol=1e-12)


def test_resonant_tan_law_all_routes():
    k = SingleMode(1.0, 1.0)
    i = int(round(np.pi / 4 / 1e-3))
    t = i * 1e-3
    assert solve_one_qubit(k, 1.0, 1.0, 1e-3, "closed_form").coeffs[i, 0] == pytest.approx(np.tan(t), abs=1e-12)
    assert solve_one_qubit(k, 1.0, 1.0, 1e-3, "riccati").coeffs[i, 0] == pytest.approx(np.tan(t), abs=1e-10)
    assert solve_one_qubit(k, 1.0, 1.0, 1e-3, "grid").coeffs[i, 0] == pytest.approx(np.tan(t), abs=1e-6)
    assert np.tan(np.pi / 4) == pytest.approx(1.0)


@pytest.mark.parametrize("method", ["grid", "riccati"])
def test_resonance_flags_singularity(method):
    s = solve_one_qubit(SingleMode(1.0, 1.0), 1.0, 2.0, 1e-3, method)
    first = s.first_singular
    assert first is not None
    assert abs(first * 1e-3 - np.pi / 2) < 5e-3
    assert s.singular[first:].all() and not s.singular[:first].any()
    assert np.all(np.isfinite(s.coeffs[:first]))


def test_initial_values_vanish():
    for s in (
        solve_one_qubit(OhmicZeroT(1, 2), 1.0, 0.5, 0.05),
        solve_two_qubit_zeroth(OhmicZeroT(1, 2), TWO_QUBIT, 0.5, 0.05),
        solve_qbm_zeroth(OrnsteinUhlenbeck(1, 0), 1.0, 0.5, 0.05),
        solve_n_fermion(OrnsteinUhlenbeck(1, 0), [1, 2], 0.5, 0.05),
        solve_bosonic_O(OrnsteinUhlenbeck(1, 0), 2, 1, 0.5, 0.05),
    ):
        assert np.all(s.coeffs[0] == 0)


def test_ou_double_root_closed_form():
    # gamma = 2, Omega = omega = 0: X' = (1 - X)^2, so X = 1 - 1/(1 + t)
    s = solve_one_qubit(OrnsteinUhlenbeck(2.0, 0.0), 0.0, 20.0, 0.01, "riccati")
    assert np.max(np.abs(s.coeffs[:, 0] - (1 - 1 / (1 + s.times)))) < 1e-10
    g = solve_one_qubit(OrnsteinUhlenbeck(2.0, 0.0), 0.0, 20.0, 0.01, "grid")
    assert np.max(np.abs(g.coeffs[:, 0] - (1 - 1 / (1 + g.times)))) < 1e-4


def test_ou_stable_root():
    # gamma = 4: fixed points of X' = 2 - 4X + X^2 are 2 -+ sqrt(2); the smaller one attracts
    s = solve_one_qubit(OrnsteinUhlenbeck(4.0, 0.0), 0.0, 30.0, 0.01, "riccati")
    assert s.coeffs[-1, 0] == pytest.approx(2 - np.sqrt(2), abs=1e-10)


def agreement(solver, h):
    a = solver(h, "grid").coeffs
    b = solver(h, "riccati").coeffs
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.mark.parametrize(
    "solver",
    [
        lambda h, m: solve_one_qubit(OrnsteinUhlenbeck(2.0, 0.5), 1.0, 5.0, h, m),
        lambda h, m: solve_one_qubit(SingleMode(0.8, 1.5), 1.0, 5.0, h, m),
        lambda h, m: solve_n_fermion(OrnsteinUhlenbeck(0.4, np.pi / 4), [2.0, 1.0], 5.0, h, m),
        lambda h, m: solve_two_qubit_zeroth(OrnsteinUhlenbeck(1.0, 0.3), TWO_QUBIT, 5.0, h, m),
        lambda h, m: solve_qbm_zeroth(OrnsteinUhlenbeck(2.0, np.pi / 2), 1.0, 5.0, h, m),
    ],
    ids=["one_qubit_ou", "one_qubit_mode", "n_fermion", "two_qubit", "qbm"],
)
def test_grid_and_riccati_agree(solver):
    for h in (0.02, 0.01):
        assert agreement(solver, h) <= 5 * h**2
    assert agreement(solver, 0.02) / agreement(solver, 0.01) > 3.5


def test_diagonal_boundary_is_enforced():
    model = build_two_qubit(**TWO_QUBIT)
    s = solve_two_qubit_zeroth(OhmicZeroT(0.2, 2.0), model, 1.0, 0.05, keep_fields=True)
    x = s.grid.x
    for k in range(x.shape[1]):
        assert np.all(x[:, k, k] == model.init)
        assert np.all(np.isnan(x[:, k, k + 1:]))


def test_memory_integral_is_trapezoid_of_stored_field():
    kern = OhmicZeroT(0.3, 1.5)
    s = solve_one_qubit(kern, 1.0, 1.0, 0.01, keep_fields=True)
    k = 70
    field = s.grid.x[0, k, : k + 1]
    assert s.coeffs[k, 0] == pytest.approx(weighted_integral(kern, k * 0.01, field), abs=1e-14)


def test_symmetric_two_qubit():
    F = solve_two_qubit_zeroth(OhmicZeroT(0.1, 2.0), SYMMETRIC, 10.0, 0.01).coeffs
    assert np.max(np.abs(np.abs(F[:, 0]) - np.abs(F[:, 1]))) <= 1e-10
    assert np.max(np.abs(np.abs(F[:, 2]) - np.abs(F[:, 3]))) <= 1e-10


def test_decoupled_two_qubit_reduces_to_one_qubit():
    kappa, wA = 1.3, 0.6
    p = dict(omega_A=wA, omega_B=1.0, J_xy=0.0, J_z=0.0, kappa_A=kappa, kappa_B=0.0)
    modes = ((0.7, 1.1), (0.4, 0.2))
    F = solve_two_qubit_zeroth(DiscreteModes(modes), p, 4.0, 0.01).coeffs
    assert np.max(np.abs(F[:, 1:])) == 0
    # f1 / kappa solves the one-qubit equation with splitting 2 wA and kernel kappa^2 K
    scaled = DiscreteModes(tuple((kappa * g, w) for g, w in modes))
    X = solve_one_qubit(scaled, 2 * wA, 4.0, 0.01).coeffs[:, 0]
    assert np.max(np.abs(F[:, 0] - X / kappa)) < 1e-12


def test_exact_two_qubit_boundaries():
    n = 40
    s = solve_two_qubit_exact(OrnsteinUhlenbeck(1.0, 0.5), TWO_QUBIT, 0.8, 0.02, keep_fields=True, snapshots=[10, n])
    kA, kB = TWO_QUBIT["kappa_A"], TWO_QUBIT["kappa_B"]
    for k in (10, n):
        f5 = s.grid.f5[k]
        f = s.grid.x[:, k, : k + 1]
        assert np.all(f5[k, :k] == 0)
        assert np.allclose(f5[:k, k], 1j * (kA * f[1, :k] + kB * f[0, :k]), atol=1e-15)


def test_exact_two_qubit_reduces_to_zeroth_order():
    p = dict(omega_A=0.5, omega_B=1.0, J_xy=0.0, J_z=0.0, kappa_A=1.0, kappa_B=0.0)
    kern = OrnsteinUhlenbeck(2.0, 0.5)
    a = solve_two_qubit_exact(kern, p, 5.0, 0.02)
    b = solve_two_qubit_zeroth(kern, p, 5.0, 0.02)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-10
    assert np.nanmax(np.abs(a.noise)) == 0


def test_exact_two_qubit_matches_grassmann_derivative():
    """d psi / d xi^* = -i g^* int ds e^{i wb s} Q(t, s, xi^*) psi for one bath mode.

    ``psi`` comes from exact Grassmann propagation; ``Q`` carries the noise term
    ``i int ds' f5(t, s, s') xi^*_{s'} Q5`` built from the three-time solver.
    """
    g, wb, T = 0.9, 1.3, 1.0
    model = build_two_qubit(**TWO_QUBIT)
    psi0 = np.array([0.5, 0.3 + 0.2j, -0.4, 0.6])
    psi0 = psi0 / np.linalg.norm(psi0)
    errs = []
    for h in (0.02, 0.01):
        n = int(round(T / h))
        s = solve_two_qubit_exact(SingleMode(g, wb), TWO_QUBIT, T, h, keep_fields=True, snapshots=[n])
        psi = micro_qsd_propagate(model, [(g, wb)], psi0, T, h).amps[-1]
        lhs = _derivative_array(psi, 1, 2)
        sgrid = np.linspace(0, T, n + 1)
        w = np.full(n + 1, h)
        w[0] = w[-1] = h / 2
        phase = w * np.exp(1j * wb * sgrid)
        f = s.grid.x[:, n, :]
        regular = sum(-1j * np.conj(g) * (phase @ f[j]) * model.q_basis[j] for j in range(4)) @ psi
        noise = -1j * np.conj(g) * 1j * (-1j * np.conj(g)) * (phase @ s.grid.f5[n] @ phase)
        rhs = regular + noise * _mul_arrays(xi_star(1, 0).coeffs, model.q_basis[4] @ psi, 2)
        errs.append(np.max(np.abs(lhs - rhs)))
    assert errs[1] < 1e-4
    assert errs[0] / errs[1] > 3.5


def test_three_time_cap():
    with pytest.raises(ConfigError, match="increase h"):
        solve_two_qubit_exact(OhmicZeroT(1, 1), TWO_QUBIT, 10.0, 0.001)
    with pytest.raises(ConfigError):
        solve_bosonic_O(OhmicZeroT(1, 1), 1, 2, 10.0, 0.001, cap=100)


def test_boson_collapse_and_divergence():
    kern = OrnsteinUhlenbeck(0.4, np.pi / 4)
    same = solve_bosonic_O(kern, 1.0, 1.0, 10.0, 0.05)
    assert np.max(np.abs(same.coeffs[:, 2:])) <= 1e-8
    assert np.nanmax(np.abs(same.noise)) <= 1e-8
    ferm = solve_n_fermion(kern, [1.0, 1.0], 10.0, 0.05).coeffs
    assert np.max(np.abs(same.coeffs[:, :2] - ferm)) < 1e-12
    diff = solve_bosonic_O(kern, 2.0, 1.0, 10.0, 0.05)
    assert np.max(np.abs(diff.coeffs[:, 2])) >= 1e-3
    # the x1, x2 rows do not involve X3, X4, so the diagonal part stays fermionic
    ferm = solve_n_fermion(kern, [2.0, 1.0], 10.0, 0.05).coeffs
    assert np.max(np.abs(diff.coeffs[:, :2] - ferm)) < 1e-12


def test_n_fermion_reductions():
    kern = OrnsteinUhlenbeck(1.5, 0.3)
    a = solve_n_fermion(kern, [1.2], 5.0, 0.01).coeffs[:, 0]
    b = solve_one_qubit(kern, 1.2, 5.0, 0.01).coeffs[:, 0]
    assert np.max(np.abs(a - b)) <= 1e-10
    X = solve_n_fermion(kern, [0.8, 0.8], 5.0, 0.01).coeffs
    assert np.max(np.abs(X[:, 0] - X[:, 1])) <= 1e-10


def test_qbm_without_oscillator_frequency():
    # with omega_m = 0, x2 stays 0 and x1 stays 1, so X1 is the bare kernel integral
    kern = OrnsteinUhlenbeck(2.0, 0.5)
    s = solve_qbm_zeroth(kern, 0.0, 5.0, 0.01)
    assert np.max(np.abs(s.coeffs[:, 1])) == 0
    bare = [weighted_integral(kern, t, np.ones(k + 1)) if k else 0 for k, t in enumerate(s.times)]
    assert np.max(np.abs(s.coeffs[:, 0] - bare)) < 1e-14


def test_qbm_x2_fades_in_markov_limit():
    steady = []
    for gamma in (1.0, 10.0, 100.0):
        h = min(0.01, 0.2 / gamma)
        s = solve_qbm_zeroth(OrnsteinUhlenbeck(gamma, 0.0), 1.0, 10.0, h, "riccati")
        steady.append(abs(s.coeffs[-1, 1]))
    assert steady[0] > steady[1] > steady[2]


def test_interpolation():
    s = solve_one_qubit(OrnsteinUhlenbeck(1.0, 0.0), 0.0, 1.0, 0.1, "riccati")
    assert np.allclose(s.at(0.3), s.coeffs[3])
    assert np.allclose(s.at(0.35), 0.5 * (s.coeffs[3] + s.coeffs[4]))


def test_grid_must_divide_horizon():
    with pytest.raises(ConfigError, match="divide"):
        solve_one_qubit(SingleMode(1, 1), 1.0, 1.0, 0.3)
