import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fqsd.errors import ConfigError
from fqsd.kernels import (
    DiscreteModes,
    OhmicZeroT,
    OrnsteinUhlenbeck,
    SingleMode,
    eval_kernel,
    kernel_from_dict,
    weighted_integral,
)

finite = st.floats(-20, 20, allow_nan=False)
KERNELS = [
    SingleMode(1.0, 1.0),
    SingleMode(0.3 + 0.4j, -2.0),
    DiscreteModes(((0.6, 1.0), (0.8j, 2.0))),
    OrnsteinUhlenbeck(0.4, np.pi / 4),
    OhmicZeroT(1.0, 2.0),
]


def test_equal_time_values():
    assert eval_kernel(SingleMode(1, 1), 0.7, 0.7) == 1
    assert eval_kernel(OrnsteinUhlenbeck(0.4, np.pi / 4), 1.3, 1.3) == pytest.approx(0.2)
    assert eval_kernel(OhmicZeroT(1.0, 2.0), 0.0, 0.0) == pytest.approx(4.0)
    assert eval_kernel(DiscreteModes(((0.6, 1.0), (0.8, 2.0))), 3.0, 3.0) == pytest.approx(1.0)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: type(k).__name__)
@settings(max_examples=50, deadline=None)
@given(t=finite, s=finite)
def test_hermitian_symmetry(kernel, t, s):
    assert kernel(s, t) == pytest.approx(np.conj(kernel(t, s)), abs=1e-13, rel=1e-13)
    assert kernel(t + 1.5, s + 1.5) == pytest.approx(kernel(t, s), abs=1e-12, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(t=finite, s=finite, gamma=st.floats(0.01, 50), omega=st.floats(-5, 5))
def test_ou_modulus(t, s, gamma, omega):
    k = OrnsteinUhlenbeck(gamma, omega)
    assert abs(k(t, s)) == pytest.approx(0.5 * gamma * np.exp(-gamma * abs(t - s)), rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(g=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), w=st.floats(-5, 5), tau=finite)
def test_single_mode_is_one_discrete_mode(g, w, tau):
    assert SingleMode(g, w).lag(tau) == pytest.approx(DiscreteModes(((g, w),)).lag(tau), abs=1e-12)


def test_domain_errors():
    with pytest.raises(ValueError):
        SingleMode(1, 1)(np.nan, 0.0)
    with pytest.raises(ValueError):
        OrnsteinUhlenbeck(-1.0)
    with pytest.raises(ValueError):
        OhmicZeroT(1.0, 0.0)


def test_weighted_integral_examples():
    assert weighted_integral(OhmicZeroT(1, 1), 0.0, [1.0]) == 0
    assert weighted_integral(SingleMode(1, 0), 2.0, lambda s: np.ones_like(s), h=0.01) == pytest.approx(2.0)
    # (1 - exp(-20)) / 2 from scipy.integrate.quad at epsabs 1e-14
    ref = 0.4999999989694235
    val = weighted_integral(OrnsteinUhlenbeck(2.0, 0.0), 10.0, lambda s: np.ones_like(s), h=1e-3)
    assert abs(val - ref) < 1e-6


def test_markov_concentration():
    dev = []
    for gamma in (10.0, 100.0, 1000.0):
        # trapezoid error ~ (gamma h)^2 / 24, so h must shrink faster than 1/gamma
        h = 1.0 / np.ceil(gamma**1.5 / 0.3)
        val = weighted_integral(OrnsteinUhlenbeck(gamma, 0.0), 1.0, lambda s: np.ones_like(s), h=h)
        dev.append(abs(val - 0.5))
        assert dev[-1] < 1 / gamma
    assert dev[0] > dev[1] > dev[2]


@pytest.mark.parametrize("kernel", KERNELS[:4], ids=lambda k: type(k).__name__)
def test_trapezoid_convergence(kernel):
    field = lambda s: np.exp(0.3j * s) * np.cos(s)
    t, h = 2.0, 0.1
    ref = weighted_integral(kernel, t, field, h=h / 16)
    e1 = abs(weighted_integral(kernel, t, field, h=h) - ref)
    e2 = abs(weighted_integral(kernel, t, field, h=h / 2) - ref)
    assert e1 / e2 >= 3.5


def test_lag_table_matches_pointwise():
    k = OhmicZeroT(0.5, 3.0)
    table = k.lag_table(0.1, 5, refine=2)
    assert np.allclose(table, [k(0.05 * m, 0.0) for m in range(11)])


def test_markov_rates():
    assert OrnsteinUhlenbeck(3.0, 0.0).markov_rate() == pytest.approx(0.5)
    assert OhmicZeroT(0.2, 2.0).markov_rate() == pytest.approx(-0.4j)
    assert SingleMode(1, 1).markov_rate() is None


def test_kernel_from_dict():
    assert kernel_from_dict({"type": "ou", "gamma": 2, "Omega": 1}) == OrnsteinUhlenbeck(2.0, 1.0)
    modes = kernel_from_dict({"type": "modes", "modes": [[0.5, 1], ["0.3+0.1j", 2], [[0.1, 0.2], 3]]})
    assert modes.modes[1][0] == 0.3 + 0.1j and modes.modes[2][0] == 0.1 + 0.2j
    with pytest.raises(ConfigError, match="unknown kernel"):
        kernel_from_dict({"type": "lorentz"})
    with pytest.raises(ConfigError, match="omega_c"):
        kernel_from_dict({"type": "ohmic", "Gamma": 1})
