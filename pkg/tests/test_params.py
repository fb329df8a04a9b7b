from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracyam.errors import DomainError
from fracyam.params import c1_prefactor, c2_prefactor, make_params, m1, m21, m22, sphere_area

# kappa, alpha computed with mpmath at 30 digits from the Gamma-function formulas
ORACLE = [
    (3, 0.5, 1.0, 2.0),
    (4, 0.25, 2.0920992401062033, 6.996867099623056),
    (5, 0.75, 0.477988797486125, 11.058998717569984),
    (6, 0.3, 1.7466014585250252, 78.003094313621629),
]


def test_exact_half_values():
    p = make_params(3, 0.5)
    assert p.kappa == 1.0
    assert p.alpha == 2.0
    assert p.two_star == 2.0


@pytest.mark.parametrize("n,g,kappa,alpha", ORACLE)
def test_constants_against_high_precision(n, g, kappa, alpha):
    p = make_params(n, g)
    assert p.kappa == pytest.approx(kappa, rel=1e-12)
    assert p.alpha == pytest.approx(alpha, rel=1e-12)


@given(st.integers(1, 30), st.floats(0.01, 0.99))
def test_critical_exponent_identity(n, g):
    if n <= 2 * g:
        return
    p = make_params(n, g)
    assert p.two_star * (n - 2 * g) == pytest.approx(n + 2 * g, rel=1e-14)
    assert p.two_star > 1.0


def test_sphere_area_small_dimensions():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("n,g", [(0, 0.5), (3, 0.0), (3, 1.0), (1, 0.75), (2.5, 0.5)])
def test_invalid_parameters(n, g):
    with pytest.raises(DomainError):
        make_params(n, g)


def test_m_constants_positive_on_grids():
    for n in range(4, 21):
        for g in np.linspace(0.05, 0.95, 19):
            assert m1(n, g) > 0
    for n in range(5, 21):
        for g in np.linspace(0.02, 0.98, 50):
            if n > 4 + 2 * g:
                assert m21(n, g) > 0 and m22(n, g) > 0


def test_domain_of_second_order_constants():
    with pytest.raises(DomainError):
        m21(5, 0.6)
    with pytest.raises(DomainError):
        c2_prefactor(4, 0.5)
    with pytest.raises(DomainError):
        c1_prefactor(3, 0.5)
    with pytest.raises(DomainError):
        m1(3, 0.5)
