from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracyam.polyfield import PolyField, integrate_product, poly_to_fields
from fracyam.wquad import sphere_rule


def _random_field(rng, n, G, terms, maxdeg=3):
    exps = rng.integers(0, maxdeg + 1, size=(terms, n))
    return PolyField(n, exps, rng.normal(size=(terms, G)))


def _brute(F, r, w):
    """Sum over grid nodes of w * (sphere integral of F at radius r)."""
    deg = int(F.exps.sum(axis=1).max()) if len(F.exps) else 0
    pts, wp = sphere_rule(F.n, deg + 2)
    total = 0.0
    for g in range(len(r)):
        mono = np.prod((r[g] * pts[:, None, :]) ** F.exps[None, :, :], axis=2)
        total += w[g] * float(wp @ (mono @ F.coef[:, g]))
    return total


@given(st.integers(2, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_products_and_integrals_against_sphere_quadrature(n, t1, t2, seed):
    rng = np.random.default_rng(seed)
    Gn = 5
    r = rng.uniform(0.1, 2.0, Gn)
    w = rng.uniform(0.0, 1.0, Gn)
    F = _random_field(rng, n, Gn, t1)
    H = _random_field(rng, n, Gn, t2)
    direct = (F * H).integrate(r, w)
    assert integrate_product(F, H, r, w) == pytest.approx(direct, rel=1e-10, abs=1e-10)
    assert direct == pytest.approx(_brute(F * H, r, w), rel=1e-9, abs=1e-9)


def test_algebra():
    n, G = 3, 4
    rng = np.random.default_rng(0)
    F = _random_field(rng, n, G, 3)
    r, w = rng.uniform(0.5, 1.0, G), rng.uniform(0.1, 1.0, G)
    assert (F - F).integrate(r, w) == pytest.approx(0.0, abs=1e-12)
    assert (F + F).integrate(r, w) == pytest.approx(2 * F.integrate(r, w))
    assert (F * 3.0).integrate(r, w) == pytest.approx(3 * F.integrate(r, w))


def test_quadratic_and_linear_forms():
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    vals = np.array([1.0, 2.0])
    Q = PolyField.quadratic_form(A, vals)
    # x^T A x = x1^2 + 2 x1 x2 - x2^2
    got = {tuple(e): c[0] for e, c in zip(Q.exps.tolist(), Q.coef)}
    assert got == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): -1.0}
    L = PolyField.linear_form(np.array([0.0, 3.0]), vals)
    assert L.exps.tolist() == [[0, 1]] and L.coef[0].tolist() == [3.0, 6.0]
    Z = PolyField.quadratic_form(np.zeros((2, 2)), vals)
    assert Z.integrate(np.ones(2), np.ones(2)) == 0.0


def test_poly_to_fields_scalar_and_matrix():
    xn = np.array([0.5, 1.0])
    f = poly_to_fields({(0, 0, 0): 1.0, (2, 0, 1): 3.0}, 2, xn)
    assert f.coef.shape == (2, 2)
    m = poly_to_fields({(0, 0, 0): np.eye(2), (0, 0, 1): np.array([[0.0, 1.0], [1.0, 0.0]])}, 2, xn)
    assert m[0][0].coef.tolist() == [[1.0, 1.0]]
    assert m[0][1].coef.tolist() == [[0.5, 1.0]]
