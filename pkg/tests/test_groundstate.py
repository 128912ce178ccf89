import json

import numpy as np
import pytest

from invsq_nls import diagnostics as dg
from invsq_nls.errors import ConfigurationError
from invsq_nls.grid import RadialField, grid_for_potential
from invsq_nls.groundstate import (ShootOutcome, scaling_index, shoot, solve_ground_state, threshold_report)


def test_rejects_bad_parameters():
    with pytest.raises(ConfigurationError):
        solve_ground_state(0.0, 4.0)
    with pytest.raises(ConfigurationError):
        solve_ground_state(1.0, 2.0)


def test_scaling_index():
    assert scaling_index(4.0) == pytest.approx(0.5)
    assert scaling_index(3.0) == pytest.approx(1 / 3)


def test_shooting_brackets_the_ground_state(gs14):
    lo = shoot(1.0, 4.0, 0.9 * gs14.alpha_star).outcome
    hi = shoot(1.0, 4.0, 1.1 * gs14.alpha_star).outcome
    assert {lo, hi} == {ShootOutcome.BLEW_UP, ShootOutcome.CROSSED_ZERO}


def test_frobenius_behaviour_near_origin(gs14):
    r = np.array([1e-5, 1e-4])
    assert np.allclose(gs14.shooting(r) / r, gs14.alpha_star, rtol=1e-6)


def test_certificate(gs14):
    assert gs14.certified
    assert gs14.residual_sup <= 1e-8
    assert max(gs14.pohozaev_errors.values()) <= 1e-6
    doc = json.loads(gs14.to_json())
    for key in ("a", "p", "alpha_star", "mass", "energy", "hdot_a", "C_a", "s_p", "thresholds",
                "residual_sup", "pohozaev_errors"):
        assert key in doc


def test_pohozaev_by_independent_quadrature(gs14):
    q, p = gs14.profile, 4.0
    m, h2, lp = dg.mass(q), dg.sobolev_norm_a(q) ** 2, dg.lp_power(q, p + 2)
    assert abs(h2 + m - lp) <= 1e-6 * lp
    assert abs(h2 - p / (p + 2) * lp) <= 1e-6 * lp
    e = dg.energy(q, p, -1)
    assert e == pytest.approx((p - 2) / (2 * (p + 2)) * lp, rel=1e-6)


def test_profile_positive_and_decaying(gs14):
    v = gs14.profile.values.real
    assert np.all(v[gs14.profile.grid.nodes < 15] > 0)
    assert abs(v[-1]) < 1e-8 * v.max()


def test_extremizer_attains_constant(gs14):
    assert dg.gn_quotient(gs14.profile, 4.0) == pytest.approx(gs14.sharp_constant, rel=1e-10)


def test_quotient_dilation_invariant():
    g = grid_for_potential(1.0, 40.0, 512)
    r = g.nodes
    base = dg.gn_quotient(RadialField(g, r * np.exp(-r**2 / 2) * (1 + 0.3 * r**2)), 4.0)
    for mu in (0.5, 2.0):
        x = mu * r
        v = RadialField(g, x * np.exp(-x**2 / 2) * (1 + 0.3 * x**2))
        assert dg.gn_quotient(v, 4.0) == pytest.approx(base, rel=1e-8)


def test_sharpness_sampling(gs14, rng):
    g = gs14.profile.grid
    r = g.nodes
    for _ in range(50):
        widths = rng.uniform(0.2, 3.0, 3)
        amps = rng.standard_normal(3)
        vals = sum(A * r**g.nu * np.exp(-(r / w) ** 2) for A, w in zip(amps, widths))
        assert dg.gn_quotient(RadialField(g, vals), 4.0) <= gs14.sharp_constant * (1 + 1e-4)


def test_sharp_constant_decreases_with_a():
    c = [solve_ground_state(a, 4.0).sharp_constant for a in (0.25, 1.0, 4.0)]
    assert c[0] > c[1] > c[2]


def test_sample_on_other_grid(gs14):
    g = grid_for_potential(1.0, 25.0, 384)
    q = gs14.sample(g)
    assert dg.mass(q) == pytest.approx(gs14.mass, rel=1e-8)
    with pytest.raises(ConfigurationError):
        gs14.sample(grid_for_potential(2.0, 25.0, 384))


def test_threshold_report_cases(gs14):
    q = gs14.profile
    below = threshold_report(gs14, q * 0.9)
    assert below.verdict.value == "BelowThreshold"
    assert below.mass_energy_ratio < 1 and below.gradient_ratio < 1
    assert threshold_report(gs14, q).verdict.value == "Indeterminate"
    above = threshold_report(gs14, q * 1.2)
    assert above.gradient_ratio > 1
    assert above.verdict.value == "AboveThreshold"


def test_threshold_energy_of_scaled_ground_state(gs14):
    # E(cQ) = c^2/2 ||Q||_H^2 - c^{p+2}/(p+2) ||Q||_{p+2}^{p+2}
    c, p = 0.9, 4.0
    rep = threshold_report(gs14, gs14.profile * c)
    expected = 0.5 * c**2 * gs14.hdot_a**2 - c ** (p + 2) / (p + 2) * gs14.lp2
    assert rep.energy == pytest.approx(expected, rel=1e-10)
