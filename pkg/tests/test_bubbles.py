from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracyam.bubbles import (
    Bubble,
    HalfBubbleProfile,
    W_half_eval,
    bubble_moment,
    neumann_trace_half,
    w_eval,
)
from fracyam.errors import DomainError
from fracyam.extsolve import radial_profile
from fracyam.params import make_params

# int_{R^n} w^{2*+1} from an mpmath radial quadrature (30 digits)
MOMENT_ORACLE = [
    (3, 0.5, 19.739208802178717),
    (4, 0.25, 140.39666138692654),
    (5, 0.75, 929.7042250471402),
    (6, 0.3, 8279.2562716625912),
]


@pytest.mark.parametrize("n,g,value", MOMENT_ORACLE)
def test_zeroth_moment(n, g, value):
    assert bubble_moment(make_params(n, g), 0) == pytest.approx(value, rel=1e-11)


def test_moment_n3_is_two_pi_squared():
    assert bubble_moment(make_params(3, 0.5), 0) == pytest.approx(2 * math.pi**2, rel=1e-13)


def test_moment_domain():
    p = make_params(3, 0.5)
    with pytest.raises(DomainError):
        bubble_moment(p, 4)
    with pytest.raises(DomainError):
        bubble_moment(p, 1)


def test_peak_value():
    p = make_params(4, 0.3)
    assert w_eval(Bubble(p), np.zeros(4)) == pytest.approx(p.alpha)


@given(st.floats(0.1, 10.0), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 0.95))
def test_scaling_and_translation_covariance(lam, s0, s1, g):
    p = make_params(2, g)
    sig = np.array([s0, s1])
    x = np.array([[0.3, -1.2], [2.0, 0.5], [s0, s1]])
    lhs = w_eval(Bubble(p, lam, sig), x)
    rhs = lam ** (-p.decay) * w_eval(Bubble(p), (x - sig) / lam)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


@given(st.floats(0.2, 5.0))
def test_half_extension_traces_and_neumann_law(lam):
    p = make_params(3, 0.5)
    b = Bubble(p, lam, np.array([0.1, 0.0, -0.4]))
    xbar = np.random.default_rng(0).uniform(-4, 4, size=(50, 3))
    x = np.concatenate([xbar, np.zeros((50, 1))], axis=1)
    np.testing.assert_allclose(W_half_eval(b, x), w_eval(b, xbar), rtol=1e-14)
    np.testing.assert_allclose(neumann_trace_half(b, xbar), w_eval(b, xbar) ** p.two_star,
                               rtol=1e-12)


def test_half_extension_is_harmonic():
    p = make_params(3, 0.5)
    b = Bubble(p)
    x0 = np.array([0.3, -0.2, 0.5, 0.7])
    h = 1e-3
    lap = -2 * 4 * W_half_eval(b, x0)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        lap += W_half_eval(b, x0 + e) + W_half_eval(b, x0 - e)
    assert abs(lap / h**2) < 1e-5


def test_profile_derivatives_by_finite_differences():
    prof = HalfBubbleProfile(make_params(3, 0.5), lam=0.7)
    r, xn, h = 0.8, 0.3, 1e-6
    d = prof.derivs(r, xn)
    fd_r = (prof.derivs(r + h, xn).W - prof.derivs(r - h, xn).W) / (2 * h)
    fd_n = (prof.derivs(r, xn + h).W - prof.derivs(r, xn - h).W) / (2 * h)
    # Wr stores (1/r) dW/dr
    assert d.Wr * r == pytest.approx(fd_r, rel=1e-7)
    assert d.WN == pytest.approx(fd_n, rel=1e-7)


def test_general_gamma_profile_reproduces_closed_form():
    p = make_params(3, 0.5)
    r = np.array([0.0, 0.5, 1.5, 3.0])
    xn = np.array([0.05, 0.2, 1.0, 0.4])
    exact = HalfBubbleProfile(p).derivs(r, xn)
    got = radial_profile(p).derivs(r, xn)
    np.testing.assert_allclose(got.W, exact.W, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(got.WN, exact.WN, rtol=1e-7, atol=1e-10)


def test_general_gamma_profile_trace():
    p = make_params(2, 0.3)
    r = np.array([0.0, 0.7, 2.0])
    W0 = radial_profile(p).W(r, np.zeros(3))
    x = np.stack([r, np.zeros(3)], axis=1)
    np.testing.assert_allclose(W0, w_eval(Bubble(p), x), rtol=1e-8)


def test_closed_form_requires_half():
    with pytest.raises(DomainError):
        W_half_eval(Bubble(make_params(3, 0.3)), np.zeros(4))
