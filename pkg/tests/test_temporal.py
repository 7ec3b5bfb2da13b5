import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jndiscope.temporal import (
    EmptyYearError,
    LogisticFitError,
    MonthlyMatrix,
    UndefinedCorrelationError,
    UndefinedSlopeError,
    analysis_years,
    fit_logistic,
    growth_slope,
    logistic,
    monthly_distribution,
    pearson,
    predict_threshold_interval,
    threshold_interval_from_fit,
    threshold_month,
    year_summary,
)
from synth import TABLE_ONE, TABLE_ONE_FIT, table_one_counts


def matrix_for(year, counts):
    return MonthlyMatrix({(year, m): c for m, c in enumerate(counts, 1) if c})


def test_from_dates_and_totals():
    m = MonthlyMatrix.from_dates([date(2022, 1, 3), date(2022, 1, 9), date(2022, 3, 1), date(2023, 2, 2)])
    assert m.row(2022)[:3] == [2, 0, 1]
    assert m.totals == {2022: 3, 2023: 1}
    assert m.years == [2022, 2023]


def test_matrix_validation():
    with pytest.raises(ValueError):
        MonthlyMatrix({(2022, 13): 1})
    with pytest.raises(ValueError):
        MonthlyMatrix({(2022, 1): -1})


def test_distribution_ends_at_exactly_100():
    counts = [7, 3, 11, 1, 0, 0, 5, 9, 2, 2, 13, 17]
    d = monthly_distribution(matrix_for(2022, counts), 2022)
    assert d.p_hat[-1] == 100.0
    assert sum(d.p) == pytest.approx(100.0)
    assert all(b >= a for a, b in zip(d.p_hat, d.p_hat[1:]))


def test_empty_year():
    with pytest.raises(EmptyYearError):
        monthly_distribution(MonthlyMatrix(), 2022)


@pytest.mark.parametrize("year", sorted(TABLE_ONE))
def test_table_rows_reproduced(year):
    p1, m_star, p_m, a_v = TABLE_ONE[year]
    d = year_summary(matrix_for(year, table_one_counts(year)), year)
    assert d.p_hat[0] == pytest.approx(p1)
    assert d.m_star == m_star
    assert d.cumulative(m_star) == pytest.approx(p_m)
    assert abs(d.a_v - a_v) < 0.05


def test_threshold_tolerates_float_noise():
    d = monthly_distribution(matrix_for(2022, [79, 21] + [0] * 10), 2022)
    d.p_hat[0] = 79.0 - 1e-12
    assert threshold_month(d, 79.0) == 1


def test_growth_slope_undefined_in_january():
    d = year_summary(matrix_for(2022, [90, 10] + [0] * 10), 2022)
    assert d.m_star == 1 and d.a_v is None
    with pytest.raises(UndefinedSlopeError):
        growth_slope(d, 1)


def test_partial_years_excluded():
    m = MonthlyMatrix({(2021, 12): 50, (2022, 1): 5, (2022, 7): 5})
    assert analysis_years(m) == [2022]
    assert analysis_years(m, include_partial=True) == [2021, 2022]
    assert analysis_years(m, exclude=[2022]) == []


# -- logistic ------------------------------------------------------------------

def test_logistic_values():
    L, k, t0 = TABLE_ONE_FIT
    assert logistic(t0, L, k, t0) == pytest.approx(L / 2)
    assert abs(logistic(6, L, k, t0) - 36.4) <= 0.1


@pytest.mark.parametrize("params", [(50.0, 1.2, 3.0), (10.0, 0.5, 5.0), (37.7, 0.886, 2.263)])
def test_fit_recovers_noise_free_parameters(params):
    t = np.arange(0, 11, dtype=float)
    fit = fit_logistic(list(zip(t, logistic(t, *params))))
    np.testing.assert_allclose(fit.values, params, rtol=1e-6)
    assert fit.sse < 1e-12


def test_fit_on_table_slopes():
    pts = [(t, TABLE_ONE[y][3]) for t, y in enumerate(sorted(TABLE_ONE), 1)]
    fit = fit_logistic(pts)
    np.testing.assert_allclose(fit.values, TABLE_ONE_FIT, rtol=0.05)
    assert fit.dof == 1
    assert fit.covariance.shape == (3, 3)
    lo, hi = fit.interval([6.0])
    assert lo[0] < float(logistic(6.0, *fit.values)) < hi[0]


def test_fit_band_widens_away_from_data():
    pts = [(t, TABLE_ONE[y][3]) for t, y in enumerate(sorted(TABLE_ONE), 1)]
    fit = fit_logistic(pts)
    se = fit.standard_error([2.5, 8.0])
    assert se[1] > se[0]


@pytest.mark.parametrize("pts", [
    [(1, 30), (2, 20), (3, 10), (4, 5)],  # decreasing: k would be negative
    [(1, 5), (2, 5), (3, 5), (4, 5)],
])
def test_fit_failures_carry_trace(pts):
    with pytest.raises(LogisticFitError) as info:
        fit_logistic(pts)
    assert info.value.trace


@pytest.mark.parametrize("pts", [[(1, 1), (2, 2)], [(1, 0), (2, 1), (3, 2)]])
def test_fit_input_validation(pts):
    with pytest.raises(ValueError):
        fit_logistic(pts)


@settings(max_examples=40, deadline=None)
@given(st.floats(5, 100), st.floats(0.3, 2.0), st.floats(2.0, 8.0))
def test_fit_recovery_property(L, k, t0):
    t = np.linspace(0, 10, 15)
    fit = fit_logistic(list(zip(t, logistic(t, L, k, t0))))
    np.testing.assert_allclose(fit.values, (L, k, t0), rtol=1e-6)


def test_threshold_interval():
    iv = predict_threshold_interval(10.0, 20.0, 14.0, 35.0)
    assert (iv.low, iv.mean, iv.high) == pytest.approx((3.0, 4.5, 6.0))
    assert iv.low <= iv.mean <= iv.high
    assert predict_threshold_interval(85.0, 20.0, 10.0, 30.0).degenerate
    with pytest.raises(ValueError):
        predict_threshold_interval(10.0, 20.0, -1.0, 30.0)


def test_threshold_interval_from_fit():
    pts = [(t, TABLE_ONE[y][3]) for t, y in enumerate(sorted(TABLE_ONE), 1)]
    iv = threshold_interval_from_fit(fit_logistic(pts), 6.0, 15.3)
    assert 2.0 < iv.low <= iv.mean <= iv.high < 4.0


# -- correlation ---------------------------------------------------------------

def test_pearson_exact_cases():
    assert abs(pearson([1, 2, 3, 4], [2, 4, 6, 8]).r - 1.0) <= 1e-12
    assert abs(pearson([1, 2, 3, 4], [8, 6, 4, 2]).r + 1.0) <= 1e-12
    assert abs(pearson([1, 2, 3, 4], [1, -1, -1, 1]).r) <= 1e-12
    res = pearson([1, 2, 3, 4], [2, 1, 4, 3])
    assert abs(res.r - 0.6) <= 1e-12
    # two degrees of freedom: p = 1 - |t| / sqrt(t^2 + 2), which is 0.4 here
    assert abs(res.p_value - 0.4) <= 1e-12


def test_pearson_errors():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2])
    with pytest.raises(ValueError):
        pearson([1, 2, 3], [1, 2])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=30))
def test_pearson_matches_numpy(pairs):
    a, b = zip(*pairs)
    if np.std(a) < 1e-6 or np.std(b) < 1e-6:
        return
    res = pearson(a, b)
    assert -1.0 <= res.r <= 1.0
    assert math.isclose(res.r, np.corrcoef(a, b)[0, 1], abs_tol=1e-9)
    assert 0.0 <= res.p_value <= 1.0
