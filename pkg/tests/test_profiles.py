"""Stationary profiles, derived constants, and the rescaling maps."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdlab.profiles import (
    critical_exponent,
    extinction_exponent,
    make_params,
    make_profile,
    make_sandwich,
    eval_profile,
    profile_power,
    log_profile_power,
    recenter_sandwich,
    rescale_maps,
)


def test_exponent_fractions():
    assert critical_exponent(5) == Fraction(1, 3)
    assert critical_exponent(6) == Fraction(1, 2)
    assert extinction_exponent(5) == Fraction(3, 5)
    # ordering m* < m_c in every dimension
    for d in range(3, 12):
        assert critical_exponent(d) < extinction_exponent(d)


def test_make_params_critical_detection():
    p = make_params(5, "critical")
    assert p.is_critical
    assert p.m_exact == Fraction(1, 3)
    # the nearest double of 1/3 snaps back to the exact rational
    assert make_params(5, 1.0 / 3.0).is_critical
    assert make_params(5, float(Fraction(1, 3))).m_exact == Fraction(1, 3)
    assert not make_params(5, 0.45).is_critical
    # fractions pass through exactly
    assert make_params(7, Fraction(3, 5)).m_exact == Fraction(3, 5)


def test_make_params_derived_constants_d5_critical():
    p = make_params(5, "critical")
    # closed forms at d=5, m=1/3: kappa=3/2, beta=3/4, gamma=1/4, a=1/2, q=1
    assert p.kappa == pytest.approx(1.5, abs=1e-15)
    assert p.beta == pytest.approx(0.75, abs=1e-15)
    assert p.gamma == pytest.approx(0.25, abs=1e-15)
    assert p.a == pytest.approx(0.5, abs=1e-15)
    assert p.q_m == 1.0   # exact at the gap-loss exponent


def test_make_params_validation():
    with pytest.raises(ValueError):
        make_params(2, 0.0)
    with pytest.raises(ValueError):
        make_params(5, "weird")
    # at or above the extinction threshold (d-2)/d the rescaling breaks;
    # note the double 0.6 sits just below the exact rational 3/5 and is legal
    with pytest.raises(ValueError):
        make_params(5, Fraction(3, 5))
    with pytest.raises(ValueError):
        make_params(5, 0.9)
    assert make_params(5, 0.6).m < 0.6000000000000001


def test_profile_closed_form():
    p = make_params(5, "critical")
    prof = make_profile(p, 1.0)
    assert eval_profile(prof, 0.0) == pytest.approx(1.0, rel=1e-15)
    r = np.array([0.5, 2.0, 7.0])
    direct = (1.0 + r * r) ** -1.5
    np.testing.assert_allclose(eval_profile(prof, r), direct, rtol=1e-13)


def test_profile_pressure_identity():
    # V^(m-1) = D + r^2 exactly: the algebraic fact the scheme balances on
    p = make_params(5, "critical")
    for D in (0.25, 1.0, 4.0):
        prof = make_profile(p, D)
        r = np.geomspace(1e-3, 1e6, 41)
        np.testing.assert_allclose(
            profile_power(prof, r, p.m - 1.0), D + r * r, rtol=1e-12
        )


def test_profile_overflow_safety():
    p = make_params(5, "critical")
    prof = make_profile(p, 1.0)
    r = np.array([1e150, 1e300])
    lv = log_profile_power(prof, r, 1.0)
    assert np.all(np.isfinite(lv))
    np.testing.assert_allclose(lv, -3.0 * np.log(r), rtol=1e-14)
    # the value itself underflows gracefully to zero
    assert eval_profile(prof, 1e300) == 0.0


def test_make_profile_validation():
    p = make_params(5, "critical")
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            make_profile(p, bad)


def test_sandwich_ratio_bounds():
    p = make_params(5, "critical")
    b = make_sandwich(p, 4.0, 1.0, 0.25)
    assert b.W0 == pytest.approx(0.125, rel=1e-15)   # (1/4)^(3/2)
    assert b.W1 == pytest.approx(8.0, rel=1e-15)     # 4^(3/2)
    with pytest.raises(ValueError):
        make_sandwich(p, 1.0, 2.0, 0.25)
    re = recenter_sandwich(p, b, 2.0)
    assert (re.D0, re.D1) == (4.0, 0.25)
    assert re.D_star == 2.0


@settings(max_examples=60, deadline=None)
@given(
    t=st.floats(0.0, 0.999),
    x=st.floats(-1e3, 1e3),
    u=st.floats(1e-6, 1e6),
)
def test_rescale_roundtrip(t, x, u):
    p = make_params(5, "critical")
    maps = rescale_maps(p, T=1.0)
    s, y, v = maps.to_selfsim(t, x, u)
    t2, x2, u2 = maps.to_original(s, y, v)
    assert t2 == pytest.approx(t, abs=1e-12)
    assert x2 == pytest.approx(x, rel=1e-10, abs=1e-12)
    assert u2 == pytest.approx(u, rel=1e-10)


def test_rescale_time_monotone_and_divergent():
    p = make_params(5, "critical")
    maps = rescale_maps(p, T=2.0)
    t = np.linspace(0.0, 2.0 - 1e-9, 50)
    s = maps.to_selfsim(t)
    assert np.all(np.diff(s) > 0)
    assert s[0] == 0.0
    assert s[-1] > 4.0   # logarithmic blowup towards the extinction time
    with pytest.raises(ValueError):
        maps.to_selfsim(2.0)
    with pytest.raises(ValueError):
        rescale_maps(p, T=0.0)
