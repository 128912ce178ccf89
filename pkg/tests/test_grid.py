import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from invsq_nls.bessel import bessel_zeros
from invsq_nls.errors import ConfigurationError
from invsq_nls.grid import RadialField, SpectralField, build_grid, grid_for_potential, hankel_forward, hankel_inverse

from conftest import gaussian_mode


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, np.sqrt(0.5), np.sqrt(2.0), 3.7])
def test_zeros_match_mpmath(nu):
    z = bessel_zeros(nu, 40)
    ref = np.array([float(mpmath.besseljzero(mpmath.mpf(nu), k)) for k in range(1, 41)])
    assert np.max(np.abs(z - ref) / ref) < 1e-13


def test_zeros_many_are_increasing_and_roots():
    z = bessel_zeros(np.sqrt(2.0), 2000)
    assert np.all(np.diff(z) > 0)
    assert np.max(np.abs(jv(np.sqrt(2.0), z))) < 1e-12


def test_nu0_node_layout():
    g = build_grid(0.0, 1.0, 8)
    j = [float(mpmath.besseljzero(0, k)) for k in range(1, 10)]
    assert g.nodes[0] == pytest.approx(2.404825557695773 / j[8], rel=1e-13)
    np.testing.assert_allclose(g.nodes, np.array(j[:8]) / j[8], rtol=1e-13)


def test_invalid_grid_inputs():
    with pytest.raises(ConfigurationError):
        build_grid(1.0, 10.0, 4)
    with pytest.raises(ConfigurationError):
        build_grid(1.0, -1.0, 64)
    with pytest.raises(ConfigurationError):
        grid_for_potential(-1.0, 10.0, 64)


def test_grid_is_cached():
    assert build_grid(1.0, 20.0, 64) is build_grid(1.0, 20.0, 64)


@pytest.mark.parametrize("a", [0.0, 0.5, 1.0, 2.0])
def test_roundtrip(a, rng):
    g = grid_for_potential(a, 30.0, 256)
    u = RadialField(g, rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n))
    back = hankel_inverse(hankel_forward(u)).values
    assert np.abs(back - u.values).max() <= 1e-10 * np.abs(u.values).max()


def test_zero_field_maps_to_zero():
    g = grid_for_potential(1.0, 10.0, 64)
    assert not np.any(hankel_forward(RadialField.zeros(g)).coeffs)
    assert not np.any(hankel_inverse(SpectralField(g, np.zeros(g.n, complex))).values)


@pytest.mark.parametrize("idx", [0, 2, 10])
def test_bessel_mode_is_a_spike(idx):
    g = grid_for_potential(1.0, 10.0, 128)
    u = RadialField(g, jv(g.nu, g.spectral_nodes[idx] * g.nodes))
    c = hankel_forward(u).coeffs
    others = np.delete(np.abs(c), idx)
    assert others.max() <= 1e-6 * abs(c[idx])
    assert abs(c[idx]) ** 2 / np.sum(np.abs(c) ** 2) > 0.99


def test_spike_synthesizes_bessel_samples():
    g = grid_for_potential(2.0, 10.0, 96)
    c = np.zeros(g.n, complex)
    c[5] = 1.0
    vals = hankel_inverse(SpectralField(g, c)).values
    ref = g.spectral_weights[5] * jv(g.nu, g.spectral_nodes[5] * g.nodes)
    np.testing.assert_allclose(vals, ref, atol=1e-9 * np.abs(ref).max())


def test_parseval_random_smooth():
    g = grid_for_potential(0.5, 20.0, 200)
    r = g.nodes
    u = RadialField(g, r**g.nu * (np.exp(-(r - 3) ** 2) + 0.5j * np.exp(-r**2 / 8)))
    c = hankel_forward(u).coeffs
    lhs = np.dot(g.quad_weights, np.abs(u.values) ** 2)
    rhs = np.dot(g.spectral_weights, np.abs(c) ** 2)
    assert abs(lhs - rhs) <= 1e-8 * lhs


def test_quadrature_integrates_gaussian_moment():
    # sum w f(r_j) ~ int_0^inf f r dr; for f = r^(2 nu) exp(-r^2): Gamma(nu+1)/2
    g = grid_for_potential(1.0, 20.0, 256)
    f = gaussian_mode(g) ** 2
    assert np.dot(g.quad_weights, f) == pytest.approx(0.5, rel=1e-10)


def test_derivative_matrix_on_gaussian():
    g = grid_for_potential(1.0, 20.0, 256)
    r = g.nodes
    u = gaussian_mode(g)
    exact = (1 - r**2) * np.exp(-r**2 / 2)
    assert np.abs(g.derivative_matrices[0] @ u - exact).max() < 1e-8


def test_origin_rule_integrates_singular_moment():
    # int |u|^2 / r^3 over the plane for u = r exp(-r^2/2): 2 pi * sqrt(pi)/2
    g = grid_for_potential(1.0, 40.0, 512)
    val = g.integrate_local(lambda r, v, vr: np.abs(v) ** 2 / r**3, gaussian_mode(g))
    assert val == pytest.approx(np.pi**1.5, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(0.5, 3.0))
def test_roundtrip_property(coef, width):
    g = grid_for_potential(1.0, 20.0, 128)
    r = g.nodes
    vals = sum(c * r ** (g.nu + 2 * k) * np.exp(-(r / width) ** 2) for k, c in enumerate(coef))
    u = RadialField(g, vals.astype(complex))
    back = hankel_inverse(hankel_forward(u)).values
    assert np.abs(back - u.values).max() <= 1e-10 * max(np.abs(u.values).max(), 1e-300)
