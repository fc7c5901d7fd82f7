"""Entropy/Fisher functionals: integrands, bundles, comparison checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdlab.entropy_functionals import (
    DissipationReport,
    dissipation_residual,
    check_entropy_sandwich,
    check_fisher_comparison,
    check_lp_entropy_bound,
    edge_dissipation,
    edge_flux,
    entropy_integrand,
    entropy_integrand_from_deviation,
    evaluate_bundle,
    fisher_comparison_constants,
    fisher_evolution_check,
    secant_slope,
    secant_slope_derivative,
    secant_slope_from_deviation,
)
from fdlab.fp_solver import InitialDataSpec, make_initial_data, run
from fdlab.profiles import make_params, make_sandwich
from fdlab.radial_grid import build_grid, make_field, weighted_integral

# 30-digit quadrature of the entropy of w = 1 + 0.1 cos^2(pi (r-2.5)) on
# 2 < r < 3 against the d=5 critical profile with D=1
BUMP_ENTROPY = 0.69176285622959105


def test_entropy_integrand_basics():
    m = 1.0 / 3.0
    assert entropy_integrand(1.0, m) == 0.0
    assert entropy_integrand(np.array([1.0, 1.0]), m).tolist() == [0.0, 0.0]
    # m = 0 branch: w - 1 - log w
    w = np.array([0.5, 1.5, 3.0])
    assert np.allclose(entropy_integrand(w, 0.0), w - 1.0 - np.log(w), rtol=1e-14)
    with pytest.raises(ValueError):
        entropy_integrand(0.0, m)
    with pytest.raises(ValueError):
        entropy_integrand(np.array([1.0, -2.0]), m)
    with pytest.raises(ValueError):
        entropy_integrand(np.array([1.0, np.nan]), m)


@given(
    w=st.floats(min_value=1e-6, max_value=1e3).filter(lambda x: abs(x - 1.0) > 1e-9),
    m=st.floats(min_value=0.0, max_value=0.95),
)
@settings(max_examples=80, deadline=None)
def test_entropy_integrand_positive_off_one(w, m):
    assert entropy_integrand(w, m) > 0.0


def test_entropy_integrand_quadratic_limit():
    for m in (0.0, 1.0 / 3.0, 0.45, 0.9):
        x = 1e-5
        val = entropy_integrand_from_deviation(x, m)
        assert val == pytest.approx(0.5 * x * x, rel=1e-4)


def test_deviation_path_matches_ratio_path():
    m = 1.0 / 3.0
    x = np.array([-0.5, -1e-3, 1e-3, 0.5, 3.0])
    a = entropy_integrand_from_deviation(x, m)
    b = entropy_integrand(1.0 + x, m)
    assert np.allclose(a, b, rtol=1e-10)


def test_deviation_path_resolves_below_epsilon():
    """Where w = 1 + x rounds to exactly 1, the deviation form still sees x."""
    m = 1.0 / 3.0
    x = 1e-30
    assert float(1.0 + x) == 1.0
    assert entropy_integrand(1.0 + x, m) == 0.0
    assert entropy_integrand_from_deviation(x, m) == pytest.approx(
        0.5 * x * x, rel=1e-12
    )
    with pytest.raises(ValueError):
        entropy_integrand_from_deviation(-1.0, m)


def test_secant_slope_forms():
    m = 1.0 / 3.0
    w = np.array([0.25, 0.9, 1.1, 4.0])
    direct = (w ** (m - 1.0) - 1.0) / ((m - 1.0) * (w - 1.0))
    assert np.allclose(secant_slope(w, m), direct, rtol=1e-12)
    assert secant_slope(1.0, m) == 1.0
    # deviation path: resolved far below float epsilon of the ratio
    assert secant_slope_from_deviation(1e-20, m) == pytest.approx(1.0, rel=1e-15)
    x = np.array([-0.3, 0.4, 2.0])
    assert np.allclose(
        secant_slope_from_deviation(x, m), secant_slope(1.0 + x, m), rtol=1e-10
    )


def test_secant_slope_derivative_matches_finite_difference():
    m = 0.45
    h = 1e-6
    for w in (0.3, 0.8, 1.0, 1.7, 5.0):
        fd = (secant_slope(w + h, m) - secant_slope(w - h, m)) / (2 * h)
        assert secant_slope_derivative(w, m) == pytest.approx(fd, rel=1e-5, abs=1e-12)


@pytest.fixture(scope="module")
def fine_snapshot():
    params = make_params(5, "critical")
    bounds = make_sandwich(params, 4.0, 1.0, 0.25)
    spec = InitialDataSpec(bounds, center=2.5, width=0.5, amplitude=0.1)
    grid = build_grid(5, 50.0, 2400)
    return make_initial_data(spec, grid, params)


def test_bundle_against_quadrature_oracle(fine_snapshot):
    bundle = evaluate_bundle(fine_snapshot)
    assert bundle.F_nl == pytest.approx(BUMP_ENTROPY, rel=1e-4)
    # internal consistency of the bundle entries
    snap = fine_snapshot
    g = snap.g.values
    F_lin = weighted_integral(
        make_field(snap.g.grid, g * g), snap.params, snap.bounds.D_star, "2-m"
    )
    assert bundle.F_lin == pytest.approx(F_lin, rel=1e-12)
    assert bundle.l2_err == pytest.approx(math.sqrt(F_lin), rel=1e-12)
    assert bundle.N_g == pytest.approx(float(np.max(np.abs(g))), rel=1e-14)
    assert bundle.sup_w == pytest.approx(1.1, rel=1e-4)
    assert bundle.inf_w == 1.0


def test_bundle_on_exact_profile():
    params = make_params(5, "critical")
    bounds = make_sandwich(params, 4.0, 1.0, 0.25)
    spec = InitialDataSpec(bounds, center=2.5, width=0.5, amplitude=0.0)
    snap = make_initial_data(spec, build_grid(5, 50.0, 200), params)
    b = evaluate_bundle(snap)
    assert b.F_nl == 0.0
    assert b.I_nl == 0.0
    assert b.F_lin == 0.0
    assert b.I_lin == 0.0
    assert b.l2_err == 0.0
    assert b.linf_err == 0.0
    assert b.sup_w == b.inf_w == 1.0


def test_small_amplitude_entropy_ratio():
    """F_nl -> F_lin / 2 in the small-perturbation limit."""
    params = make_params(5, "critical")
    bounds = make_sandwich(params, 4.0, 1.0, 0.25)
    spec = InitialDataSpec(bounds, center=2.5, width=0.5, amplitude=1e-6)
    snap = make_initial_data(spec, build_grid(5, 50.0, 400), params)
    b = evaluate_bundle(snap)
    assert b.F_nl / b.F_lin == pytest.approx(0.5, rel=1e-5)


def test_edge_dissipation_wires_into_bundle(fine_snapshot):
    snap = fine_snapshot
    bundle = evaluate_bundle(snap)
    omega = secant_slope_from_deviation(
        snap.g.values / (snap.bounds.D_star + snap.g.grid.nodes ** 2), snap.params.m
    ) * snap.g.values
    direct = edge_dissipation(snap.v.grid, snap.v.values, omega)
    assert bundle.I_nl == pytest.approx(direct, rel=1e-10)
    flux = edge_flux(snap.v.grid, snap.v.values, omega)
    assert direct == pytest.approx(float(np.dot(flux, np.diff(omega))), rel=1e-14)


def test_edge_flux_validation(fine_snapshot):
    grid = fine_snapshot.v.grid
    good_v = fine_snapshot.v.values
    omega = np.zeros(grid.n_nodes)
    with pytest.raises(ValueError):
        edge_flux(grid, good_v[:-1], omega)
    with pytest.raises(ValueError):
        edge_flux(grid, -good_v, omega)


def test_comparison_checks_hold_along_run(small_run):
    snapshots = small_run.meta["snapshots"]
    assert len(snapshots) == len(small_run.rows)
    for row, snap in zip(small_run.rows, snapshots):
        sand = check_entropy_sandwich(row)
        assert sand.ok, f"s={row.s}: sandwich margins {sand.lower_margin}, {sand.upper_margin}"
        fish = check_fisher_comparison(row, snap)
        assert fish.ok, f"s={row.s}: fisher margins {fish.margin}, {fish.margin_apriori}"
        # looser a-priori constants leave at least as much slack
        assert fish.margin_apriori >= fish.margin - 1e-12
        lp = check_lp_entropy_bound(snap)
        assert lp.ok, f"s={row.s}: lp margin {lp.margin}"
        assert lp.p == pytest.approx(2.5)


def test_fisher_comparison_constants_validation(params_critical):
    with pytest.raises(ValueError):
        fisher_comparison_constants(params_critical, 2.0, 0.0)
    with pytest.raises(ValueError):
        fisher_comparison_constants(params_critical, 0.5, 2.0)
    k1, k2 = fisher_comparison_constants(params_critical, 1.0, 1.0)
    assert k1 == pytest.approx(2.0)
    assert k2 > 0.0


def test_lp_bound_rejects_negative_exponent():
    params = make_params(5, -0.5)
    bounds = make_sandwich(params, 4.0, 1.0, 0.25)
    spec = InitialDataSpec(bounds, center=2.5, width=0.5, amplitude=0.01)
    snap = make_initial_data(spec, build_grid(5, 50.0, 200), params)
    with pytest.raises(ValueError):
        check_lp_entropy_bound(snap)


def test_dissipation_residual_fine_cadence(params_critical, bounds_default, bump_spec):
    series = run(
        bump_spec,
        build_grid(5, 50.0, 200),
        params=params_critical,
        s_end=2.0,
        cadence=0.1,
    )
    report = dissipation_residual(series)
    assert isinstance(report, DissipationReport)
    assert report.s.shape == (len(series.rows) - 1,)
    assert report.max_relative < 0.05
    assert np.all(report.residuals >= 0.0)


def test_dissipation_residual_rejects_coarse_cadence(small_run):
    with pytest.raises(ValueError):
        dissipation_residual(small_run)


def test_fisher_evolution_on_run(small_run):
    report = fisher_evolution_check(small_run)
    assert report.bounded
    assert report.decays
    assert report.envelope_ok
    assert report.tail_fraction < 0.10
    assert report.peak > 0.0
