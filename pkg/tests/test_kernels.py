import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kernel_moments_by_quadrature, trig_moments_by_quadrature
from wcnet.kernels import (DiracShifted, Gamma, NoDelay, Uniform, dirac, kernel_from_spec,
                           sinc, sinhc, strong_gamma, weak_gamma)

uniform_kernels = st.builds(
    lambda tau, frac: Uniform(tau, tau * frac),
    st.floats(0.01, 2.0), st.floats(0.05, 1.0))
gamma_kernels = st.builds(Gamma, st.integers(1, 4), st.floats(0.5, 50.0))
any_kernel = st.one_of(st.just(NoDelay()), st.builds(DiracShifted, st.floats(0.01, 2.0)),
                       uniform_kernels, gamma_kernels)


def test_mean_delays():
    assert Gamma(1, 10.0).mean_delay() == pytest.approx(0.1)
    assert Gamma(2, 20.0).mean_delay() == pytest.approx(0.1)
    assert NoDelay().mean_delay() == 0.0
    assert DiracShifted(0.5).mean_delay() == 0.5
    assert Uniform(0.3, 0.1).mean_delay() == 0.3


def test_variances():
    assert Uniform(0.1, 0.1).variance() == pytest.approx(0.01 / 3, abs=1e-15)
    assert Gamma(1, 10.0).variance() == pytest.approx(0.01)
    assert DiracShifted(0.5).variance() == 0.0
    assert NoDelay().variance() == 0.0


def test_presets_share_mean():
    assert weak_gamma(0.1) == Gamma(1, 10.0)
    assert strong_gamma(0.1) == Gamma(2, 20.0)
    assert dirac(0.0) == NoDelay()


def test_laplace_reference_values():
    assert Gamma(1, 10.0).laplace(10j) == pytest.approx(0.5 - 0.5j, abs=1e-15)
    assert Uniform(0.1, 0.1).laplace(0.0) == pytest.approx(1.0, abs=1e-15)
    assert Uniform(0.1, 0.1).laplace(1e-9) == pytest.approx(1.0, abs=1e-9)


@given(any_kernel)
def test_laplace_normalized_at_origin(kernel):
    assert kernel.laplace(0.0) == pytest.approx(1.0, abs=1e-14)


def test_trig_moments_reference_values():
    s, c = NoDelay().trig_moments(3.7)
    assert (s, c) == (0.0, 1.0)
    s, c = weak_gamma(0.1).trig_moments(10.0)
    assert s == pytest.approx(0.5, abs=1e-15) and c == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=1000)
@given(any_kernel, st.floats(0.0, 30.0))
def test_transform_on_imaginary_axis_is_c_minus_i_s(kernel, omega):
    s, c = kernel.trig_moments(omega)
    assert abs(kernel.laplace(1j * omega) - (c - 1j * s)) < 1e-12
    assert s * s + c * c <= 1.0 + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.one_of(uniform_kernels, gamma_kernels))
def test_moments_match_quadrature(kernel):
    lo, hi = kernel.support()
    mean, var = kernel_moments_by_quadrature(kernel.density, lo, hi)
    assert kernel.mean_delay() == pytest.approx(mean, abs=1e-8)
    assert kernel.variance() == pytest.approx(var, abs=1e-8)
    assert quad_mass(kernel) == pytest.approx(1.0, abs=1e-10)


def quad_mass(kernel):
    from scipy.integrate import quad
    lo, hi = kernel.support()
    return quad(kernel.density, lo, hi, limit=200)[0]


@settings(max_examples=30, deadline=None)
@given(st.one_of(uniform_kernels, gamma_kernels), st.floats(0.1, 20.0))
def test_trig_moments_match_quadrature(kernel, omega):
    lo, hi = kernel.support()
    s_ref, c_ref = trig_moments_by_quadrature(kernel.density, lo, hi, omega)
    s, c = kernel.trig_moments(omega)
    assert s == pytest.approx(s_ref, abs=1e-8)
    assert c == pytest.approx(c_ref, abs=1e-8)


@given(st.floats(-1e-3, 1e-3))
def test_small_argument_series_are_smooth(u):
    if abs(u) > 1e-12:
        assert sinc(u) == pytest.approx(math.sin(u) / u, rel=1e-12)
        assert sinhc(u) == pytest.approx(math.sinh(u) / u, rel=1e-12)
    assert sinc(0.0) == 1.0 and sinhc(0.0) == 1.0


def test_gamma_rational_form_matches_transform():
    k = Gamma(2, 7.0)
    num, den = k.rational()
    lam = np.array([0.3 + 2j, -1.0 + 0.5j, 4.0])
    val = np.polynomial.polynomial.polyval(lam, num) / np.polynomial.polynomial.polyval(lam, den)
    assert np.allclose(val, k.laplace(lam), atol=1e-14)
    assert k.poles() == [(-7.0, 2)]


@pytest.mark.parametrize("spec,expected", [
    ({"kind": "none"}, NoDelay()),
    ({"kind": "dirac", "tau_m": 0.0}, NoDelay()),
    ({"kind": "dirac", "tau_m": 0.2}, DiracShifted(0.2)),
    ({"kind": "uniform", "tau_m": 0.1}, Uniform(0.1, 0.1)),
    ({"kind": "uniform", "tau_m": 0.2, "sigma": 0.05}, Uniform(0.2, 0.05)),
    ({"kind": "gamma", "m": 2, "gamma": 20}, Gamma(2, 20.0)),
    ({"kind": "gamma", "m": 1, "tau_m": 0.1}, Gamma(1, 10.0)),
])
def test_kernel_from_spec(spec, expected):
    assert kernel_from_spec(spec) == expected


@pytest.mark.parametrize("spec,field", [
    ({"kind": "lorentz"}, "kind"),
    ({"kind": "dirac"}, "tau_m"),
    ({"kind": "dirac", "tau_m": "x"}, "tau_m"),
    ({"kind": "uniform", "tau_m": 0.1, "sigma": 0.2}, "sigma"),
    ({"kind": "gamma", "m": 1.5, "gamma": 3}, "m"),
    ({"kind": "gamma", "m": 1, "gamma": 10, "tau_m": 0.5}, "tau_m"),
    ({"kind": "gamma", "m": 1, "gamma": -1}, "gamma"),
    ({"kind": "none", "colour": 1}, "colour"),
])
def test_kernel_from_spec_names_bad_field(spec, field):
    with pytest.raises(ValueError, match=f"kernel.{field}"):
        kernel_from_spec(spec)


@given(any_kernel)
def test_spec_roundtrip(kernel):
    assert kernel_from_spec(kernel.to_spec()) == kernel
