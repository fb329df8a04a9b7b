from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracyam import expfit
from fracyam.bubbles import bubble_moment
from fracyam.errors import DomainError, FitError
from fracyam.metric import normalized_ii_metric, trace_free_ii, umbilic_rnnn_metric
from fracyam.params import make_params


def test_cutoff_shape_and_derivative():
    t = np.linspace(0.0, 3.0, 301)
    chi, dchi = expfit.cutoff(t)
    assert np.all(chi[t <= 1] == 1.0) and np.all(chi[t >= 2] == 0.0)
    assert np.all(np.diff(chi) <= 0)
    s = np.linspace(1.05, 1.95, 19)
    h = 1e-6
    fd = (expfit.cutoff(s + h)[0] - expfit.cutoff(s - h)[0]) / (2 * h)
    np.testing.assert_allclose(expfit.cutoff(s)[1], fd, rtol=1e-6, atol=1e-9)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.integers(2, 4))
def test_fit_recovers_synthetic_series(a0, ak, alog, k):
    eps = np.array(expfit.default_eps(1.0, 12))
    L = np.log(1.0 / eps)
    vals = a0 + ak * eps**k + alog * eps**k * L + 0.7 * eps ** (k + 1) - 0.2 * eps ** (k + 3)
    fit = expfit.fit_series(eps, vals, k)
    assert fit.constant == pytest.approx(a0, abs=1e-9)
    assert fit.log_coef == pytest.approx(alog, abs=1e-4)
    assert fit.coefficient(f"eps^{k}")[0] == pytest.approx(ak, abs=1e-3)


def test_fit_needs_enough_points():
    eps = np.array([0.1, 0.05, 0.02])
    with pytest.raises(FitError):
        expfit.fit_series(eps, np.ones(3), 2)


def test_run_validation():
    p = make_params(3, 0.5)
    mm = normalized_ii_metric(3, trace_free_ii(3, 1.0))
    with pytest.raises(DomainError):
        expfit.ExpansionRun(p, mm, r2=1.5)
    with pytest.raises(DomainError):
        expfit.ExpansionRun(p, mm, eps=(0.01, 0.02))
    with pytest.raises(DomainError):
        expfit.ExpansionRun(make_params(4, 0.5), mm)


def test_flat_energy_is_bubble_energy():
    # II = 0: I00 tends to int w^{2*+1} = 2 pi^2 and the log coefficient vanishes
    p = make_params(3, 0.5)
    run = expfit.ExpansionRun(p, normalized_ii_metric(3, np.zeros((3, 3))))
    fit = expfit.energy_expansion(run)
    assert fit.constant == pytest.approx(2 * math.pi**2, rel=1e-6)
    assert abs(fit.log_coef) < 1e-3


def test_non_umbilic_log_coefficient_and_optimal_correction():
    p = make_params(3, 0.5)
    run = expfit.ExpansionRun(p, normalized_ii_metric(3, trace_free_ii(3, 2.0)),
                              expfit.Correction("psi1", 0.0))
    pieces = expfit.energy_pieces(run)
    fit = expfit.energy_expansion(run, pieces)
    assert fit.log_coef == pytest.approx(expfit.expected_log_coefficient(run), rel=1e-3)
    scan = expfit.scan_correction(run, pieces=pieces)
    assert scan.C_opt == pytest.approx(-0.5, abs=0.01)
    rep = expfit.run_report(run, fit, scan)
    assert rep["pass"] and json.dumps(rep)


def test_threaded_pieces_match_serial():
    p = make_params(4, 0.5)
    run = expfit.ExpansionRun(p, umbilic_rnnn_metric(4, -1.0), eps=expfit.default_eps(1.0, 8))
    a = expfit.energy_pieces(run)
    b = expfit.energy_pieces(expfit.ExpansionRun(p, run.mm, eps=run.eps, workers=3))
    np.testing.assert_array_equal(a.I00, b.I00)


def test_f_expansion_second_order_coefficient():
    p = make_params(3, 0.5)
    f = {(0, 0, 0): 1.0, (2, 0, 0): -1.0, (0, 1, 1): 0.3}
    fx = expfit.f_expansion(p, f)
    want = -2.0 / 6.0 * bubble_moment(p, 2)
    got, _ = fx.coefficient("eps^2")
    assert got == pytest.approx(want, rel=1e-6)
    assert fx.coefficient("1")[0] == pytest.approx(bubble_moment(p, 0), rel=1e-9)


@pytest.mark.parametrize("d,expected", [(1.0, 1.0), (4.0, 3.0)])
def test_flatness_exponent(d, expected):
    rep = expfit.flatness_order_check(make_params(3, 0.5), d)
    assert rep.exponent == pytest.approx(expected, abs=0.05)
    assert rep.predicted_exponent == min(d, 3)
    assert rep.active == (rep.exponent > 2.0)


@pytest.mark.parametrize("n,g", [(4, 0.5), (5, 0.5), (5, 0.3)])
def test_first_ratio_identity(n, g):
    p = make_params(n, g)
    val, closed = expfit.ratio_check(p, "c1")
    assert val == pytest.approx(closed, rel=1e-6)


def test_second_ratio_routes_agree():
    p = make_params(6, 0.5)
    space, _ = expfit.ratio_check(p, "c2", route="space")
    fourier, _ = expfit.ratio_check(p, "c2", route="fourier")
    assert space == pytest.approx(fourier, rel=1e-6)


def test_ratio_domain():
    with pytest.raises(DomainError):
        expfit.ratio_check(make_params(4, 0.5), "c2")
    with pytest.raises(DomainError):
        expfit.ratio_check(make_params(4, 0.3), "c1", route="space")
