from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import roots_jacobi

from fracyam.errors import DomainError
from fracyam.params import sphere_area
from fracyam.wquad import (
    HalfBall,
    Slab,
    gauss_legendre,
    integrate,
    jacobi_rule,
    make_grid,
    mc_integrate,
    normal_rule,
    sphere_monomial_integral,
    sphere_rule,
)


@pytest.mark.parametrize("m,a,b", [(5, 0.0, 0.0), (8, 0.0, -0.5), (12, 0.5, 0.0), (20, 0.0, 0.9)])
def test_jacobi_rule_matches_scipy(m, a, b):
    t, w = jacobi_rule(m, a, b)
    t0, w0 = roots_jacobi(m, a, b)
    np.testing.assert_allclose(t, t0, atol=1e-13)
    np.testing.assert_allclose(w, w0, rtol=1e-12)


@given(st.floats(0.05, 0.95), st.integers(0, 13), st.floats(0.5, 30.0))
def test_normal_rule_exact_on_polynomials(g, k, T):
    x, w = normal_rule(8, g, T)
    exact = T ** (k + 2 - 2 * g) / (k + 2 - 2 * g)
    assert float(w @ x**k) == pytest.approx(exact, rel=1e-12)


def test_gauss_legendre_interval():
    x, w = gauss_legendre(6, 1.0, 3.0)
    assert w.sum() == pytest.approx(2.0)
    assert float(w @ x**5) == pytest.approx((3**6 - 1) / 6)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_sphere_rule_weights_and_moments(n):
    pts, w = sphere_rule(n, 8)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-14)
    assert w.sum() == pytest.approx(sphere_area(n), rel=1e-13)
    alpha = [2, 2] + [0] * (n - 2)
    val = float(w @ np.prod(pts ** np.array(alpha), axis=1))
    assert val == pytest.approx(sphere_monomial_integral(n, alpha), rel=1e-12)


@given(st.integers(2, 5), st.lists(st.integers(0, 3), min_size=5, max_size=5))
def test_monomial_integral_against_product_rule(n, exps):
    alpha = [2 * e for e in exps[:n]]
    pts, w = sphere_rule(n, sum(alpha) + 2)
    brute = float(w @ np.prod(pts ** np.array(alpha), axis=1))
    assert sphere_monomial_integral(n, alpha) == pytest.approx(brute, rel=1e-11, abs=1e-14)


def test_odd_monomials_vanish():
    assert sphere_monomial_integral(3, (1, 2, 0)) == 0.0


def test_second_moment_closed_form():
    for n in range(2, 8):
        e = [2] + [0] * (n - 1)
        assert sphere_monomial_integral(n, e) == pytest.approx(sphere_area(n) / n, rel=1e-13)


def test_half_ball_volume():
    # int_{B_R^+} x_N^{1-2g} dx for n = 2, g = 1/4, by the grid and in closed form
    n, g, R = 2, 0.25, 1.5
    grid = make_grid(HalfBall(n, g, R), radial=10, angular=10, sphere_degree=6)
    b = 1 - 2 * g
    ang = sphere_area(n) * math.gamma(n / 2) * math.gamma((b + 1) / 2) / (
        2 * math.gamma((n + b + 1) / 2))
    exact = ang * R ** (n + 1 + b) / (n + 1 + b)
    assert integrate(grid, lambda x: np.ones(len(x))) == pytest.approx(exact, rel=1e-12)


def test_slab_against_monte_carlo():
    dom = Slab(2, 0.5, 2.0, 1.0)
    f = lambda x: np.exp(-x[:, 0] ** 2) * (1 + x[:, 2])
    grid = make_grid(dom, tangential=16, normal=8)
    q = integrate(grid, f)
    mc, err = mc_integrate(f, dom, 200_000, seed=1)
    assert abs(q - mc) < 5 * err
    assert mc_integrate(f, dom, 1000, seed=3) == mc_integrate(f, dom, 1000, seed=3)


def test_invalid_rules():
    with pytest.raises(DomainError):
        jacobi_rule(0, 0.0, 0.0)
    with pytest.raises(DomainError):
        normal_rule(4, 1.2, 1.0)
