import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from bnsp_green.convolution import (
    KINDS,
    angular_mean_diffusion,
    angular_mean_shell,
    corA8_profile,
    init_propagation,
    ratio_stable,
    rhs_value,
    source_value,
    spacetime_convolve,
    verify_corA8,
    verify_init,
    verify_inequality,
)

# scipy nquad over (u, rho, s) at x=1, t=2, c=1
ORACLE = {"I": 0.11348450826140356, "III": 0.13887615955696941}


@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0), st.floats(1.0, 30.0), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_angular_mean_diffusion_matches_quadrature(x, rho, tau1, p):
    f = lambda u: (1 + (x * x + rho * rho - 2 * x * rho * u) / tau1) ** (-p)
    ref = 0.5 * quad(f, -1, 1, epsabs=0, epsrel=1e-12)[0]
    assert float(angular_mean_diffusion(x, np.array([rho]), tau1, p)[0]) == pytest.approx(ref, rel=1e-9)


@given(st.floats(0.1, 20.0), st.floats(0.1, 20.0), st.floats(1.0, 30.0), st.floats(0.0, 25.0))
def test_angular_mean_shell_matches_quadrature(x, rho, tau1, center):
    def f(u):
        d = math.sqrt(max(x * x + rho * rho - 2 * x * rho * u, 0.0))
        return (1 + (d - center) ** 2 / tau1) ** -3.0

    ref = 0.5 * quad(f, -1, 1, epsabs=0, epsrel=1e-12, limit=200)[0]
    assert float(angular_mean_shell(x, np.array([rho]), tau1, center, 3.0)[0]) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("kind", ["I", "III"])
def test_convolution_matches_oracle(kind):
    v, err = spacetime_convolve(kind, 1.0, 2.0, rtol=1e-8, max_nodes=128)
    assert v == pytest.approx(ORACLE[kind], rel=1e-8)
    assert err <= 1e-8


def test_convolution_zero_time_and_symmetry():
    assert spacetime_convolve("I", 3.0, 0.0) == (0.0, 0.0)
    assert spacetime_convolve("I", -2.0, 4.0)[0] == spacetime_convolve("I", 2.0, 4.0)[0]


def test_convolution_tolerance_error():
    with pytest.raises(RuntimeError, match="tolerance"):
        spacetime_convolve("II", 30.0, 64.0, rtol=1e-14, max_nodes=16)


def test_stronger_kernel_gives_smaller_convolution():
    # VI differs from II only by an extra (1+tau)^{-1/2} in the kernel
    for x in (0.0, 10.0):
        assert spacetime_convolve("VI", x, 16.0)[0] < spacetime_convolve("II", x, 16.0)[0]


def test_source_and_rhs_values():
    assert source_value("D2", 0.0, 0.0, 1.0) == 1.0
    assert source_value("H2", 5.0, 5.0, 1.0) == pytest.approx(6.0**-4)
    with pytest.raises(ValueError):
        source_value("Q", 0.0, 0.0, 1.0)
    assert rhs_value(KINDS["II"], 3.0, 3.0, 1.0) == pytest.approx(4.0**-2 * (1 + 9 / 4) ** -1.5 + 4.0**-2)


def test_ratio_stable():
    assert ratio_stable(np.array([[1.0, 1.1, 1.15], [2.0, 2.1, 2.0]]))
    assert not ratio_stable(np.array([[1.0, 1.5, 2.25]]))


@pytest.mark.parametrize("kind", ["I", "VI"])
def test_verify_inequality_with_control(kind):
    res = verify_inequality(kind)
    assert res.passed
    assert res.control_failed_as_expected
    assert res.to_json()["pass"] is True


def test_init_propagation_scaling_at_origin():
    # at |x| = 0 the ratio to the H-weight grows like t^{4 - 2 r1}
    w = lambda t: (1 + t * t / (1 + t)) ** -1.5
    a = init_propagation("init_H", 0.0, 50.0, r1=2.2) / w(50.0)
    b = init_propagation("init_H", 0.0, 100.0, r1=2.2) / w(100.0)
    assert math.log(b / a) / math.log(2.0) == pytest.approx(4 - 2 * 2.2, abs=0.1)


@pytest.mark.parametrize("kind, r1", [("init_D", 2.2), ("init_H", 2.2), ("init_H", 2.0)])
def test_verify_init(kind, r1):
    res = verify_init(kind, r1=r1)
    assert res.passed


def test_corA8_alpha_derivative_decays_faster():
    lo = verify_corA8(0)
    hi = verify_corA8(1)
    assert lo["pass"] and hi["pass"]
    assert lo["temporal_slope"] - hi["temporal_slope"] == pytest.approx(0.5, abs=0.1)
    v = corA8_profile(16.0, np.linspace(0.0, 40.0, 5))
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
