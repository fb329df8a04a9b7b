from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma as G
from scipy.special import kv

from fracyam.errors import DomainError
from fracyam.extsolve import (
    TorusExtensionProblem,
    discrete_energy,
    dtn_apply,
    dtn_symbol,
    dtn_variational,
    flat_symbol,
    graded_normal_grid,
    load_field,
    save_field,
    solve_extension,
    solve_mode,
)
from fracyam.params import make_params


def _flat(n=2, g=0.5, M=16, m=200, T=20.0, **kw):
    p = make_params(n, g)
    return TorusExtensionProblem(p, 2 * math.pi, M, graded_normal_grid(g, T, m), **kw)


@pytest.mark.parametrize("g", [0.25, 0.5, 0.75])
def test_symbol_against_power_law(g):
    ext = _flat(g=g)
    for k in range(1, 7):
        assert dtn_symbol(ext, [k, 0]) == pytest.approx(k ** (2 * g), rel=1e-3)
        assert dtn_symbol(ext, [k, 0], "variational") == pytest.approx(k ** (2 * g), rel=1e-3)


@pytest.mark.parametrize("g", [0.3, 0.7])
def test_mode_profile_against_bessel(g):
    ng = graded_normal_grid(g, 20.0, 200)
    k = 2.0
    theta = solve_mode(ng, [k * k])[0]
    z = k * ng.x[1:60]
    exact = 2 ** (1 - g) / G(g) * z**g * kv(g, z)
    np.testing.assert_allclose(theta[1:60], exact, atol=2e-4)


def test_constant_trace_extends_constantly():
    ext = _flat(M=8)
    U = solve_extension(ext, np.ones(ext.grid_shape)).values
    np.testing.assert_allclose(U, 1.0, atol=1e-13)
    assert abs(flat_symbol(ext).flat[0]) < 1e-14


def test_variational_flux_reproduces_energy():
    ext = _flat(M=12)
    u = 1 + np.random.default_rng(0).normal(size=ext.grid_shape)
    U = solve_extension(ext, u)
    lhs = ext.cell * float(np.vdot(u, dtn_variational(ext, u)))
    assert lhs == pytest.approx(discrete_energy(ext, U), rel=1e-10)


def _curved(M=12, c=1.0, m=120):
    p = make_params(2, 0.5)
    ng = graded_normal_grid(0.5, 20.0, m)
    shape = (M, M, ng.m)
    A = np.zeros((2, 2) + shape)
    X = np.linspace(0, 2 * math.pi, M, endpoint=False)
    bump = 1 + 0.3 * np.cos(X)[:, None, None] * np.ones(shape)
    A[0, 0] = A[1, 1] = c * bump
    return TorusExtensionProblem(p, 2 * math.pi, M, ng, A_tan=A, A_NN=c * bump)


def test_variable_coefficient_operator_symmetric_and_positive():
    ext = _curved()
    rng = np.random.default_rng(3)
    u, v = rng.normal(size=(2,) + ext.grid_shape)
    # symmetry holds up to the linear-solver tolerance
    Du = dtn_variational(ext, u, solve_extension(ext, u, tol=1e-13))
    Dv = dtn_variational(ext, v, solve_extension(ext, v, tol=1e-13))
    assert float(np.vdot(v, Du)) == pytest.approx(float(np.vdot(u, Dv)), rel=1e-7)
    assert float(np.vdot(u, Du)) > 0


@given(st.floats(0.5, 3.0))
def test_identity_coefficients_reduce_to_flat(c):
    M = 8
    p = make_params(2, 0.5)
    ng = graded_normal_grid(0.5, 20.0, 80)
    shape = (M, M, ng.m)
    A = np.zeros((2, 2) + shape)
    A[0, 0] = A[1, 1] = c
    scaled = TorusExtensionProblem(p, 2 * math.pi, M, ng, A_tan=A, A_NN=np.full(shape, c))
    flat = TorusExtensionProblem(p, 2 * math.pi, M, ng)
    x = 2 * math.pi * np.arange(M) / M
    u = np.cos(x)[:, None] + np.sin(2 * x)[None, :] + np.cos(x + 3 * x[:, None])
    np.testing.assert_allclose(dtn_variational(scaled, u), c * dtn_variational(flat, u),
                               rtol=1e-7, atol=1e-9)


def test_ansatz_and_variational_flux_agree_on_smooth_data():
    ext = _flat(M=16)
    X, Y = np.meshgrid(*ext.coordinates(), indexing="ij")
    u = np.cos(X) + 0.5 * np.sin(2 * Y)
    exact = np.cos(X) + 0.5 * 2 * np.sin(2 * Y)
    np.testing.assert_allclose(dtn_apply(ext, u), exact, atol=2e-3)
    np.testing.assert_allclose(dtn_variational(ext, u), exact, atol=2e-3)


def test_field_roundtrip(tmp_path):
    arr = np.random.default_rng(0).normal(size=(3, 4, 5))
    path, side = save_field(tmp_path / "u.bin", arr, {"n": 2})
    back, meta = load_field(path)
    np.testing.assert_array_equal(back, arr)
    assert meta["shape"] == [3, 4, 5] and meta["n"] == 2


def test_validation():
    ext = _flat(M=8)
    with pytest.raises(DomainError):
        solve_extension(ext, np.ones((4, 4)))
    with pytest.raises(DomainError):
        solve_extension(ext, np.full(ext.grid_shape, np.nan))
    with pytest.raises(DomainError):
        TorusExtensionProblem(make_params(2, 0.5), 1.0, 8, graded_normal_grid(0.3, 5.0, 10))
