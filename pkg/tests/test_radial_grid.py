"""Graded grids, weighted quadrature, and the discrete Dirichlet form."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdlab.profiles import make_params
from fdlab.radial_grid import (
    build_grid,
    gradient_edge_coeffs,
    make_field,
    parse_weight,
    tail_bound,
    unit_sphere_area,
    weight_values,
    weighted_gradient_form,
    weighted_integral,
)

PARAMS = make_params(5, "critical")


def test_unit_sphere_area_closed_forms():
    assert unit_sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert unit_sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert unit_sphere_area(5) == pytest.approx(8.0 * math.pi ** 2 / 3.0, rel=1e-15)


def test_build_grid_structure():
    g = build_grid(5, 400.0, 1200, 0.25)
    assert g.n_nodes == 1201
    assert g.nodes[0] == 0.0
    assert g.r_max == 400.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.dr.shape == (1200,)
    assert g.edge_mid.shape == (1200,)
    # core uniform to 1, then geometric
    n_core = round(0.25 * 1200)
    np.testing.assert_allclose(g.nodes[: n_core + 1], np.linspace(0, 1, n_core + 1), atol=1e-15)


def test_build_grid_validation():
    with pytest.raises(ValueError):
        build_grid(5, 400.0, 8)
    with pytest.raises(ValueError):
        build_grid(5, 5.0, 100)
    with pytest.raises(ValueError):
        build_grid(5, 400.0, 100, core_fraction=1.5)
    with pytest.raises(ValueError):
        build_grid(0, 400.0, 100)


def test_quadrature_ball_volume_exact():
    # unit integrand: cell volumes telescope to the exact ball volume
    for d in (3, 5, 8):
        g = build_grid(d, 50.0, 300)
        vol = float(np.sum(g.cell_weights))
        exact = unit_sphere_area(d) / d * 50.0 ** d
        assert vol == pytest.approx(exact, rel=1e-13)


def test_weighted_integrals_against_frozen_oracle():
    # arbitrary-precision quadrature oracle (30-digit), d=5, D=1, R=50:
    # integrand exp(-r^2/2) against each named profile power
    oracle = {
        "m": 44.680425768549678,
        "2-m": 3.6735919724981569,
        "4-3m": 0.74040717639079134,
        "lebesgue": 98.957717804772592,
        "1": 11.219883283685069,
    }
    g = build_grid(5, 50.0, 4000, 0.25)
    f = make_field(g, np.exp(-0.5 * g.nodes ** 2))
    for name, val in oracle.items():
        got = weighted_integral(f, PARAMS, 1.0, name)
        assert got == pytest.approx(val, rel=1e-5), name


def test_gradient_form_against_frozen_oracle():
    # d/dr exp(-r^2) energy in the V weight; oracle 4.12840193579406
    g = build_grid(5, 50.0, 6000, 0.25)
    f = make_field(g, np.exp(-g.nodes ** 2))
    got = weighted_gradient_form(f, PARAMS, 1.0)
    assert got == pytest.approx(4.12840193579406, rel=2e-5)


def test_gradient_form_constants():
    g = build_grid(5, 100.0, 500)
    c = make_field(g, np.full(g.n_nodes, 3.7))
    assert weighted_gradient_form(c, PARAMS, 1.0) == 0.0
    f = make_field(g, np.sin(g.nodes))
    shifted = make_field(g, np.sin(g.nodes) + 11.0)
    a = weighted_gradient_form(f, PARAMS, 1.0)
    b = weighted_gradient_form(shifted, PARAMS, 1.0)
    assert a == pytest.approx(b, rel=1e-12)
    assert a > 0


def test_parse_weight():
    assert parse_weight("lebesgue", PARAMS) == 0.0
    assert parse_weight("2-m", PARAMS) == pytest.approx(5.0 / 3.0, abs=1e-15)
    assert parse_weight(2.5, PARAMS) == 2.5
    with pytest.raises(ValueError):
        parse_weight("unknown", PARAMS)


def test_weight_values_overflow_safe():
    g = build_grid(5, 1.0e45, 800)
    w = weight_values(g, PARAMS, 1.0, "2-m")
    assert np.all(np.isfinite(w))
    assert w[0] == 1.0
    assert np.all(np.diff(w) <= 0)


def test_tail_bound_covers_truncation():
    # remainder of int V^(2-m) beyond R, compared on a much wider grid
    inner = build_grid(5, 1.0e4, 2000)
    outer = build_grid(5, 1.0e8, 4000)
    ones_in = make_field(inner, np.ones(inner.n_nodes))
    ones_out = make_field(outer, np.ones(outer.n_nodes))
    full = weighted_integral(ones_out, PARAMS, 1.0, "2-m")
    trunc = weighted_integral(ones_in, PARAMS, 1.0, "2-m")
    remainder = full - trunc
    bound = tail_bound(5, PARAMS, 1.0, "2-m", 1.0e4)
    assert 0 < remainder <= bound
    # a weight with divergent tail must report inf, never a silent number
    assert tail_bound(5, PARAMS, 1.0, "m", 1.0e4) == math.inf


def test_make_field_validation():
    g = build_grid(5, 50.0, 100)
    with pytest.raises(ValueError):
        make_field(g, np.ones(7))
    with pytest.raises(ValueError):
        make_field(g, np.full(g.n_nodes, np.nan))


def test_edge_coeffs_match_gradient_form():
    g = build_grid(5, 200.0, 400)
    c = gradient_edge_coeffs(g, PARAMS, 1.0)
    f = np.cos(g.nodes)
    by_coeffs = float(np.dot(c, np.diff(f) ** 2))
    by_form = weighted_gradient_form(make_field(g, f), PARAMS, 1.0)
    assert by_coeffs == pytest.approx(by_form, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-5.0, 5.0),
    b=st.floats(-5.0, 5.0),
)
def test_quadrature_linearity(a, b):
    g = build_grid(5, 50.0, 120)
    f1 = np.exp(-g.nodes)
    f2 = 1.0 / (1.0 + g.nodes ** 2)
    lhs = weighted_integral(make_field(g, a * f1 + b * f2), PARAMS, 1.0, "2-m")
    rhs = a * weighted_integral(make_field(g, f1), PARAMS, 1.0, "2-m") + b * weighted_integral(
        make_field(g, f2), PARAMS, 1.0, "2-m"
    )
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
