"""Curvature, distances, volume growth, and the embedded surface."""
import math

import numpy as np
import pytest

from fdlab.cigar_geometry import (
    cigar_embedding,
    curvature_table,
    distance_volume,
    embedding_isometry_residual,
    geodesic_ball_volume,
    geodesic_distance,
    ricci,
    trace_identity_check,
)
from fdlab.rate_analysis import fit_loglog

# Independently derived oracle values (symbolic conformal-transformation
# formula, exact rationals): (d, X) -> (radial, transversal, scalar)
RICCI_ORACLE = {
    (3, 1.0): (1.0, 1.25, 7.0),
    (3, 1.5): (64.0 / 169.0, 100.0 / 169.0, 66.0 / 13.0),
    (3, 4.0): (4.0 / 289.0, 20.0 / 289.0, 44.0 / 17.0),
    (5, 1.0): (2.0, 2.75, 26.0),
    (5, 1.5): (128.0 / 169.0, 236.0 / 169.0, 268.0 / 13.0),
    (5, 4.0): (8.0 / 289.0, 56.0 / 289.0, 232.0 / 17.0),
    (6, 1.0): (2.5, 3.5, 40.0),
    (6, 1.5): (160.0 / 169.0, 304.0 / 169.0, 420.0 / 13.0),
    (6, 4.0): (10.0 / 289.0, 74.0 / 289.0, 380.0 / 17.0),
}


def test_ricci_against_symbolic_oracle():
    for (d, X), (rad, trans, scalar) in RICCI_ORACLE.items():
        rep = ricci(d, X)
        assert rep.radial_eigenvalue == pytest.approx(rad, rel=1e-14)
        assert rep.transversal_eigenvalue == pytest.approx(trans, rel=1e-14)
        assert rep.scalar == pytest.approx(scalar, rel=1e-14)
        # matrix eigenvalues: radial simple, transversal (d-1)-fold
        np.testing.assert_allclose(rep.eigenvalues[0], rad, rtol=1e-12)
        np.testing.assert_allclose(rep.eigenvalues[1:], trans, rtol=1e-12)


def test_curvature_positive_and_bounded():
    for d in (3, 5, 8):
        for X in (0.0, 0.3, 1.0, 10.0, 1e4):
            rep = ricci(d, X)
            assert rep.eigenvalues[0] > 0.0
            assert rep.eigenvalues[-1] <= 2.0 * (d - 1) + (d - 2)
            # curvature maximal at the tip
            assert rep.eigenvalues[-1] <= ricci(d, 0.0).eigenvalues[-1]


def test_trace_identity_grid():
    for d in (3, 4, 5, 6, 7, 8):
        for X in (0.0, 0.5, 1.0, 2.0, 4.0, 16.0, 256.0):
            assert trace_identity_check(d, X) <= 1e-12 * (1.0 + ricci(d, X).scalar)


def test_eigenvalue_decay_slopes():
    X = np.geomspace(10.0, 1e4, 25)
    rad = np.array([ricci(5, x).radial_eigenvalue for x in X])
    trans = np.array([ricci(5, x).transversal_eigenvalue for x in X])
    f_rad = fit_loglog(X, rad, (X[0], X[-1]))
    f_trans = fit_loglog(X, trans, (X[0], X[-1]))
    assert f_rad.exponent_or_rate == pytest.approx(-4.0, abs=0.1)
    assert f_trans.exponent_or_rate == pytest.approx(-2.0, abs=0.1)


def test_ricci_validation():
    with pytest.raises(ValueError):
        ricci(2, 1.0)
    with pytest.raises(ValueError):
        ricci(5, -1.0)


def test_geodesic_distance_asinh_oracle():
    for r in (0.0, 0.1, 1.0, 35.0, 1e6, 1e45):
        assert geodesic_distance(r) == pytest.approx(math.asinh(r), rel=1e-10)


def test_geodesic_ball_volume_closed_form_d5():
    # exact antiderivative of tanh^4: u - tanh(u) - tanh(u)^3/3
    omega = 2.0 * math.pi ** 2.5 / math.gamma(2.5)
    for u in (1.0, 5.0):
        t = math.tanh(u)
        exact = omega * (u - t - t ** 3 / 3.0)
        assert geodesic_ball_volume(5, u) == pytest.approx(exact, rel=1e-10)


def test_linear_volume_growth():
    # volume/radius tends to the cylinder cross-section area
    omega = 2.0 * math.pi ** 2.5 / math.gamma(2.5)
    ratios = [geodesic_ball_volume(5, R) / R for R in (20.0, 40.0, 80.0)]
    for q in ratios:
        assert q == pytest.approx(omega, rel=0.15)
    assert abs(ratios[2] - omega) < abs(ratios[0] - omega)


def test_distance_volume_pairs():
    dist, vol = distance_volume(5, 100.0)
    assert dist == pytest.approx(math.asinh(100.0), rel=1e-10)
    assert vol == pytest.approx(geodesic_ball_volume(5, dist), rel=1e-12)


def test_embedding_against_frozen_oracle():
    # arbitrary-precision axial-height oracle (30-digit quadrature)
    rho = np.array([1.0, 10.0, 100.0, 1e4, 1e8])
    psi_oracle = np.array([
        0.45431093874255182,
        2.5310752201708792,
        4.8311823422139325,
        9.4363275303896801,
        18.646667899865863,
    ])
    phi, psi = cigar_embedding(rho)
    np.testing.assert_allclose(psi, psi_oracle, rtol=1e-8)
    np.testing.assert_allclose(phi, rho / np.sqrt(1.0 + rho ** 2), rtol=1e-14)


def test_embedding_limits_and_log_slope():
    rho = np.geomspace(1e2, 1e8, 30)
    phi, psi = cigar_embedding(rho)
    # transversal radius saturates: the surface is asymptotically a cylinder
    assert abs(phi[-1] - 1.0) < 1e-14
    slope = np.polyfit(np.log(rho), psi, 1)[0]
    assert slope == pytest.approx(1.0, abs=0.02)


def test_embedding_isometry_residual():
    rho = np.concatenate([[0.0], np.geomspace(1e-3, 1e8, 50)])
    assert np.max(embedding_isometry_residual(rho)) <= 1e-12


def test_curvature_table_order():
    reports = curvature_table(5, [0.0, 1.0, 2.0])
    assert [rep.X for rep in reports] == [0.0, 1.0, 2.0]
    assert all(rep.d == 5 for rep in reports)
