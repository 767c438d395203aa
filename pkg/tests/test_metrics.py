import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from erlang_diffusion.chain import scaled_moment, stationary_distribution
from erlang_diffusion.metrics import (
    CSV_COLUMNS,
    format_float,
    interval_pmf,
    kolmogorov_distance,
    moment_error_report,
    pmf_sup_error,
    rate_fit,
    smoothed_indicator,
    smoothed_indicator_derivative,
    smoothed_indicator_raw,
    w2_lower_bound,
)
from erlang_diffusion.params import params_for, state_to_x
from erlang_diffusion.reference import KOLMOGOROV, MEAN_BENEFIT, PMF_SUP, P, RELABELLED

from .conftest import cached

RATE_GRID = [(5, 4.0), (50, 46.59), (500, 488.94), (5000, 4965.0)]


def test_csv_schema():
    assert CSV_COLUMNS == ("n", "R", "EX_scaled", "mean_err_y0", "rel_err_y0", "mean_err_y", "rel_err_y",
                           "m2_err_y0", "m2_err_y", "pmf_sup_y0", "pmf_sup_y", "dk_y0", "dk_y")
    assert format_float(1.0 / 3.0) == "3.33333e-01"
    assert format_float(0.0) == "0.00000e+00"


def test_report_fields_and_row():
    rep = moment_error_report(params_for(5, 4.0), with_bounds=True)
    row = rep.csv_row()
    assert row[0] == "5" and len(row) == len(CSV_COLUMNS)
    for name in CSV_COLUMNS[2:]:
        assert getattr(rep, name) >= 0
    assert 0 <= rep.dk_y0 <= 1 and 0 <= rep.dk_y <= 1
    assert rep.bound_flags == {"moment_bounds": True, "density_bound": True}


def test_report_examples():
    rep = moment_error_report(params_for(100, 80.0))
    assert P("2.25e-3").matches(rep.mean_err_y0) and P("1.03e-4").matches(rep.mean_err_y)
    rep = moment_error_report(params_for(50, 46.59))
    assert P("1.04").matches(rep.EX_scaled)
    assert P("3.2e-2").matches(rep.mean_err_y0) and P("1.2e-3").matches(rep.mean_err_y)


def test_report_examples_n5000_second_moment():
    rep = moment_error_report(params_for(5000, 4965.0))
    # E Xs^2 is printed as 5.57; the lattice sum gives 5.646 (see the ledger)
    assert P("2.9e-2").matches(rep.m2_err_y0) and P("5.5e-5").matches(rep.m2_err_y)
    assert rep.EX2_scaled == pytest.approx(5.64625, rel=1e-5)


def test_kolmogorov_examples():
    _, dist, eta = cached(5, 4.0, "constant")
    assert P("8.76e-2").matches(kolmogorov_distance(dist, eta).value)


def test_kolmogorov_self_distance():
    _, dist, _ = cached(5, 4.0)
    assert kolmogorov_distance(dist, dist).value == 0.0


@pytest.mark.parametrize("n,R", [(5, 4.0), (100, 80.0)])
@pytest.mark.parametrize("kind", ["state_dependent", "constant"])
def test_kolmogorov_brute_force(n, R, kind):
    d, dist, dens = cached(n, R, kind)
    res = kolmogorov_distance(dist, dens)
    K = dist.tail_cutoff(1e-15)
    xs = np.linspace(state_to_x(0, d) - 2, state_to_x(K, d), 10 * (K + 3))
    lattice = state_to_x(np.arange(K + 1), d)
    xs = np.union1d(xs, np.concatenate([lattice, lattice - 1e-12]))
    from erlang_diffusion.chain import scaled_cdf

    gap = np.max(np.abs(scaled_cdf(dist, xs) - dens.cdf_at(xs)))
    assert res.value == pytest.approx(gap, abs=1e-9)
    assert res.value >= gap - 1e-12
    assert res.error_bar < 1e-12


@pytest.mark.parametrize("key", sorted(MEAN_BENEFIT))
def test_y_beats_y0(key):
    rep = moment_error_report(params_for(*key))
    assert rep.mean_err_y < rep.mean_err_y0
    assert rep.rel_err_y < rep.rel_err_y0


@pytest.mark.parametrize("key", sorted(PMF_SUP))
def test_pmf_y_beats_y0(key):
    n, R = RELABELLED.get(key, key)
    _, dist, nu = cached(n, R)
    _, _, eta = cached(n, R, "constant")
    assert pmf_sup_error(dist, nu).value <= pmf_sup_error(dist, eta).value


def test_pmf_examples():
    _, dist, nu = cached(100, 60.0)
    assert P("2.95e-5").matches(pmf_sup_error(dist, nu).value)
    _, dist, eta = cached(5, 4.99, "constant")
    assert P("2.61e-4").matches(pmf_sup_error(dist, eta).value)


def test_interval_pmf_column_sums():
    _, dist, nu = cached(5, 4.0)
    K = dist.tail_cutoff(1e-14)
    assert np.sum(interval_pmf(nu, K)) == pytest.approx(1.0, abs=2e-3)


def test_rate_fit_exact_power_law():
    fit = rate_fit([(R, 3.0 / R) for R in (4.0, 40.0, 400.0, 4000.0)])
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.stderr < 1e-6  # square root of rounding-level residuals
    with pytest.raises(ValueError):
        rate_fit([(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)])
    with pytest.raises(ValueError):
        rate_fit([(1.0, 1.0), (2.0, 1.0)])


@given(st.floats(-5, 5), st.floats(0.05, 1.99), st.floats(-10, 10))
def test_smoothed_indicator_shape(a, eps, x):
    v = smoothed_indicator_raw(x, a, eps)
    assert 0.0 <= v <= 1.0 + 1e-15
    if x <= a:
        assert v == 1.0
    if x >= a + eps:
        assert v == pytest.approx(0.0, abs=1e-12)
    assert abs(smoothed_indicator_derivative(x, a, eps)) <= 4.0 / eps**2 * (1 + 1e-12)


def test_smoothed_indicator_derivative_grid_and_membership():
    for eps in (0.3, 1.0, 1.9):
        x = np.linspace(-1, 3, 4001)
        dv = smoothed_indicator_derivative(x, 0.5, eps)
        assert np.max(np.abs(dv)) <= 4.0 / eps**2
        # scaled version is in W2: h and h' both 1-Lipschitz
        tf = smoothed_indicator(0.5, eps)
        h = tf.h(x)
        hp = np.asarray(tf.dh(x))
        assert np.max(np.abs(np.diff(h)) / np.diff(x)) <= 1 + 1e-9
        assert np.max(np.abs(np.diff(hp)) / np.diff(x)) <= 1 + 1e-9
    with pytest.raises(ValueError):
        smoothed_indicator(0.0, 2.0)


def test_smoothing_step_of_kolmogorov_argument():
    """``|F_X(a) - F_Y(a)|`` is controlled by the h_eps gap plus the density's mass on ``[a, a + eps]``."""
    d, dist, nu = cached(5, 4.0)
    from erlang_diffusion.chain import scaled_cdf
    from erlang_diffusion.metrics import _chain_expect_compact

    for a in (-1.0, 0.0, 0.7):
        for eps in (0.25, 0.5, 1.0):
            h = lambda x: smoothed_indicator_raw(x, a, eps)
            ex = _chain_expect_compact(dist, h, a + eps)
            ey = nu.expect(h, kinks=(a, a + eps / 2, a + eps))
            # 1(x <= a) <= h_eps <= 1(x <= a+eps)
            upper = ex - ey + (nu.cdf_at(a + eps) - nu.cdf_at(a))
            lower = ex - ey - (nu.cdf_at(a + eps) - nu.cdf_at(a))
            gap_plus = scaled_cdf(dist, a) - nu.cdf_at(a)
            assert gap_plus <= upper + 1e-12
            gap_minus = scaled_cdf(dist, a + eps) - nu.cdf_at(a + eps)
            assert gap_minus >= lower - 1e-12
            # the W2 function is the scaled version, so its gap is eps^2/4 times smaller
            tf = smoothed_indicator(a, eps)
            assert abs(tf.expect_density(nu) - eps**2 / 4 * (ey - h(0.0))) < 1e-9


def test_w2_lower_bound_terms():
    res = w2_lower_bound(params_for(5, 4.0))
    assert res["value"] == max(res["terms"].values())
    assert res["terms"]["identity"] == pytest.approx(1.19373e-2, rel=1e-5)
    assert len(res["terms"]) == 3 + 9 * 3


def test_w2_regression_guard():
    # C_emp frozen from the rate grid (max of R * w2 is 0.0611)
    C_emp = 0.07
    for n, R in RATE_GRID:
        assert w2_lower_bound(params_for(n, R))["value"] <= C_emp / R


def test_unscaled_mean_error_shrinks():
    # |E X - (R + sqrt(R) E Y)| = sqrt(R) |E Xs - E Y| <= C / sqrt(R); R |E Xs - E Y| peaks near 0.061
    C = 0.07
    for n, R in RATE_GRID:
        d, dist, nu = cached(n, R)
        err = d.sqrt_R * abs(scaled_moment(dist, 1) - nu.moment(1))
        assert err <= C / math.sqrt(R)
        # the unscaled mean identity
        k = np.arange(dist.tail_cutoff(1e-18) + 1)
        EX = math.fsum(k * dist.pmf(k))
        assert EX == pytest.approx(R + d.sqrt_R * scaled_moment(dist, 1), rel=1e-12)
