"""Rate fitting, model selection, good-time classification, comparisons."""

import numpy as np
import pytest

from fdlab.entropy_functionals import FunctionalBundle
from fdlab.rate_analysis import (
    FlowTimeSeries,
    calibrate_good_times_constant,
    default_window,
    fit_exponential,
    fit_loglog,
    fit_power,
    good_times_report,
    mode_comparison,
    select_model,
)


def make_series(s, columns, meta=None):
    """Synthetic FlowTimeSeries with the given column arrays."""
    base = dict(
        m=1.0 / 3.0, F_nl=1.0, I_nl=1.0, F_lin=1.0, I_lin=1.0,
        sup_w=1.1, inf_w=1.0, N_g=0.1, rel_mass=1.0, l2_err=1.0, linf_err=0.1,
    )
    rows = []
    for i, si in enumerate(np.asarray(s, dtype=float)):
        vals = dict(base)
        for name, arr in columns.items():
            vals[name] = float(np.asarray(arr)[i])
        rows.append(FunctionalBundle(s=float(si), **vals))
    return FlowTimeSeries(rows=tuple(rows), meta=meta or {})


def test_fit_recovers_exact_power_law():
    x = np.geomspace(1.0, 100.0, 40)
    y = 3.5 * x ** (-1.25)
    fit = fit_loglog(x, y, (x[0], x[-1]))
    assert fit.model == "power"
    assert fit.exponent_or_rate == pytest.approx(-1.25, rel=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.5), rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.rms_residual < 1e-12


def test_fit_recovers_exact_exponential():
    x = np.linspace(0.0, 20.0, 50)
    y = 2.0 * np.exp(-0.35 * x)
    fit = fit_loglog(x, y, (0.0, 20.0), model="exponential")
    assert fit.model == "exponential"
    # decay rate reported positive
    assert fit.exponent_or_rate == pytest.approx(0.35, rel=1e-12)
    assert fit.intercept == pytest.approx(np.log(2.0), rel=1e-12)


def test_fit_validation():
    x = np.geomspace(1.0, 10.0, 10)
    y = x ** -1.0
    with pytest.raises(ValueError):
        fit_loglog(x, y[:-1])
    with pytest.raises(ValueError):
        fit_loglog(x[:2], y[:2])
    with pytest.raises(ValueError):
        fit_loglog(x, y, model="cubic")
    with pytest.raises(ValueError):
        fit_loglog(x, y, (0.5, 10.0))      # window starts before the series
    with pytest.raises(ValueError):
        fit_loglog(x, y, (1.0, 20.0))      # window ends past the series
    with pytest.raises(ValueError):
        fit_loglog(x, y, (9.5, 10.0))      # fewer than 3 points inside
    y_bad = y.copy()
    y_bad[5] = 0.0
    with pytest.raises(ValueError):
        fit_loglog(x, y_bad)
    with pytest.raises(ValueError):
        fit_loglog(x - 5.0, y, model="power")  # nonpositive abscissae


def test_default_window():
    x = np.linspace(2.0, 22.0, 11)
    assert default_window(x) == (12.0, 21.0)


def test_select_model_discriminates():
    s = np.linspace(0.5, 12.0, 47)
    exp_series = make_series(s, {"F_nl": np.exp(-0.7 * s)})
    best, fit_p, fit_e = select_model(exp_series, "F_nl", window=(0.5, 12.0))
    assert best == "exponential"
    assert fit_e.exponent_or_rate == pytest.approx(0.7, rel=1e-10)

    pow_series = make_series(s, {"F_nl": s ** -0.5})
    best, fit_p, fit_e = select_model(pow_series, "F_nl", window=(0.5, 12.0))
    assert best == "power"
    assert fit_p.exponent_or_rate == pytest.approx(-0.5, rel=1e-10)

    flat = make_series(s, {"F_nl": np.full_like(s, 2.0)})
    best, _, _ = select_model(flat, "F_nl", window=(0.5, 12.0))
    assert best == "inconclusive"


def test_series_helpers_and_validation():
    s = np.linspace(0.0, 4.0, 17)
    series = make_series(s, {"F_nl": np.exp(-s) + 0.5})
    assert np.allclose(series.s, s)
    assert series.column("F_nl")[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        make_series([0.0, 1.0, 1.0], {})   # non-increasing cadence
    f_p = fit_power(series, "F_nl", window=(1.0, 4.0))
    f_e = fit_exponential(series, "F_nl", window=(1.0, 4.0))
    assert f_p.model == "power" and f_e.model == "exponential"


def test_good_times_all_good():
    s = np.arange(0.0, 10.25, 0.25)
    series = make_series(s, {"N_g": np.full_like(s, 0.1), "I_lin": np.ones_like(s)})
    report = good_times_report(series, K=1.0)
    assert report.good.all()
    assert not report.vacuous.any()
    assert report.intervals == ((0.0, 10.0),)
    assert len(report.window_table) == 5
    assert report.coverage == 1.0
    assert report.late_coverage == 1.0


def test_good_times_with_bad_stretch():
    s = np.arange(0.0, 10.25, 0.25)
    N_g = np.full_like(s, 0.1)
    N_g[(s > 2.1) & (s < 3.9)] = 10.0     # K N^4 = 1e4 >> I there
    series = make_series(s, {"N_g": N_g, "I_lin": np.ones_like(s)})
    report = good_times_report(series, K=1.0)
    assert len(report.intervals) == 2
    flags = [w[2] for w in report.window_table]
    # the [2,4] window has no good subinterval of length 1/2
    assert flags == [True, False, True, True, True]
    assert report.coverage == pytest.approx(0.8)
    assert report.late_coverage == 1.0
    with pytest.raises(ValueError):
        good_times_report(series, K=-1.0)


def test_good_times_stationary_is_vacuous():
    s = np.arange(0.0, 6.25, 0.25)
    series = make_series(
        s, {"N_g": np.zeros_like(s), "I_lin": np.zeros_like(s)}
    )
    report = good_times_report(series, K=1.0)
    assert report.vacuous.all()
    assert not report.good.any()
    assert report.intervals == ()
    assert report.coverage == 0.0


def test_calibrated_constant_on_run(small_run):
    K = calibrate_good_times_constant(small_run)
    assert np.isfinite(K) and K > 0.0
    report = good_times_report(small_run, K)
    assert 0.0 <= report.coverage <= 1.0
    assert report.K == K


def test_mode_comparison_structure():
    table = mode_comparison(5, [0.45], R_max=50.0, N=160, s_end=6.0, cadence=0.25)
    assert table.d == 5
    assert len(table.rows) == 1
    row = table.rows[0]
    assert row.error is None
    assert not row.is_critical
    assert row.best_model == "exponential"
    assert row.exponent_or_rate > 0.0
    # headline needs both a critical and a non-critical row
    assert "no contrast claim" in table.headline()


def test_mode_comparison_bad_row_is_isolated():
    table = mode_comparison(5, [0.99], R_max=50.0, N=160, s_end=6.0)
    row = table.rows[0]
    assert row.best_model == "error"
    assert row.error is not None and "ValueError" in row.error
