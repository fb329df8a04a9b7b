from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from fracyam.errors import DomainError
from fracyam.expfit import curvature_invariants
from fracyam.metric import (
    E_term,
    ModelMetric,
    flat_weyl_metric,
    metric_density,
    metric_inverse,
    normalized_ii_metric,
    trace_free_ii,
    umbilic_rnnn_metric,
)


def test_first_order_inverse_is_twice_ii():
    II = trace_free_ii(3, 1.0)
    mm = normalized_ii_metric(3, II)
    t = 1e-5
    gi = metric_inverse(mm, np.array([0.0, 0.0, 0.0, t]))
    np.testing.assert_allclose((gi[:3, :3] - np.eye(3)) / t, 2 * II, atol=1e-4)
    assert gi[3, 3] == 1.0 and np.all(gi[3, :3] == 0)


def test_density_is_second_order_when_mean_curvature_vanishes():
    mm = normalized_ii_metric(3, trace_free_ii(3, 1.0))
    x = np.array([0.01, 0.02, -0.01, 0.01])
    d1, d2 = metric_density(mm, x) - 1, metric_density(mm, x / 2) - 1
    assert d1 / d2 == pytest.approx(4.0, rel=1e-3)


@given(st.floats(0.1, 4.0), st.integers(0, 10_000))
def test_ii_norm_invariant_under_rotation(norm2, seed):
    Q = Rotation.random(random_state=seed).as_matrix()
    II = trace_free_ii(3, norm2, Q)
    assert np.trace(II) == pytest.approx(0.0, abs=1e-12)
    assert float((II**2).sum()) == pytest.approx(norm2, rel=1e-12)
    # the metric density along the normal axis only sees rotation invariants
    x = np.array([0.0, 0.0, 0.0, 0.3])
    a = metric_density(normalized_ii_metric(3, II), x)
    b = metric_density(normalized_ii_metric(3, trace_free_ii(3, norm2)), x)
    assert a == pytest.approx(b, rel=1e-12)


def test_curvature_invariants_of_the_families():
    S = trace_free_ii(5, 2.0)
    w2, ric2 = curvature_invariants(flat_weyl_metric(5, S, 0.3))
    assert w2 == pytest.approx(0.0, abs=1e-14)
    assert ric2 == pytest.approx(2.0)


def test_umbilic_model_has_flat_low_order_terms():
    mm = umbilic_rnnn_metric(4, -1.0)
    x = np.array([0.1, -0.05, 0.0, 0.02, 0.0])
    np.testing.assert_allclose(metric_inverse(mm, x)[:4, :4], np.eye(4), atol=1e-14)


def test_potential_sign_and_validation():
    mm = normalized_ii_metric(3, trace_free_ii(3, 1.0))
    with pytest.raises(DomainError):
        E_term(mm, 0.5, np.array([0.0, 0.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        metric_density(mm, np.array([3.0, 0.0, 0.0, 0.1]))
    with pytest.raises(DomainError):
        metric_density(mm, np.array([0.0, 0.0, 0.0, -0.1]))


def test_higher_order_model_rejects_second_fundamental_form():
    with pytest.raises(DomainError):
        ModelMetric(n=3, truncation_order=3, II=trace_free_ii(3, 1.0))
