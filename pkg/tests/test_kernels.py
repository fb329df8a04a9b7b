from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracyam import _kernels_py, kernels


def _system(rng, B, m):
    off = rng.uniform(-1, 0, size=(B, m))
    diag = 2.5 + rng.uniform(0, 1, size=(B, m))
    return np.roll(off, 1, axis=1), diag, off, rng.normal(size=(B, m))


@given(st.integers(1, 6), st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_thomas_solves_tridiagonal_systems(B, m, seed):
    lo, d, up, rhs = _system(np.random.default_rng(seed), B, m)
    x = _kernels_py.thomas_batched(lo, d, up, rhs)
    for b in range(B):
        A = np.diag(d[b]) + np.diag(up[b, :-1], 1) + np.diag(lo[b, 1:], -1)
        np.testing.assert_allclose(A @ x[b], rhs[b], atol=1e-11)


def test_element_apply_matches_assembled_matrix():
    rng = np.random.default_rng(1)
    P, m = 3, 7
    U = rng.normal(size=(P, m + 1))
    coef = rng.uniform(0.5, 2, size=(P, m))
    k00, k01, k11 = rng.normal(size=(3, m))
    y = _kernels_py.element_apply(U, coef, k00, k01, k11)
    for p in range(P):
        A = np.zeros((m + 1, m + 1))
        for e in range(m):
            A[e:e + 2, e:e + 2] += coef[p, e] * np.array([[k00[e], k01[e]], [k01[e], k11[e]]])
        np.testing.assert_allclose(y[p], A @ U[p], atol=1e-13)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_compiled_kernels_agree_with_fallback():
    from fracyam import _kernels

    rng = np.random.default_rng(2)
    lo, d, up, rhs = _system(rng, 40, 100)
    np.testing.assert_allclose(_kernels.thomas_batched(lo, d, up, rhs),
                               _kernels_py.thomas_batched(lo, d, up, rhs), rtol=1e-13, atol=1e-14)
    U = rng.normal(size=(40, 101))
    coef = rng.uniform(size=(40, 100))
    k = rng.normal(size=(3, 100))
    np.testing.assert_allclose(_kernels.element_apply(U, coef, *k),
                               _kernels_py.element_apply(U, coef, *k), rtol=1e-13, atol=1e-14)


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
