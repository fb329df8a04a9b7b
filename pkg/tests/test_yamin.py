from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracyam.acceptance import bump_problem
from fracyam.bubbles import Bubble, w_eval
from fracyam.errors import DomainError
from fracyam.extsolve import TorusExtensionProblem, graded_normal_grid
from fracyam.params import make_params
from fracyam.yamin import (
    SUPERCRITICAL_FLAG,
    TELEMETRY_COLUMNS,
    ConstraintProblem,
    beta_continuation,
    blowup_diagnostics,
    constraint_value,
    criterion_bound,
    criterion_check,
    minimize_subcritical,
    write_telemetry,
)


def _torus(M=16, m=80):
    p = make_params(2, 0.5)
    return TorusExtensionProblem(p, 2 * math.pi, M, graded_normal_grid(0.5, 20.0, m))


def test_constant_weight_gives_constant_minimiser():
    ext = _torus(32, 120)
    res = minimize_subcritical(ConstraintProblem(ext, 1.0 / ext.volume, 2.0), init="random")
    assert res.converged
    assert abs(res.theta) <= 1e-8
    assert np.ptp(res.u) <= 1e-6
    assert res.constraint_residual <= 1e-8


@given(st.floats(-3, 3), st.floats(1.1, 3.0), st.integers(0, 1000))
def test_constraint_is_even(scale, beta, seed):
    u = np.random.default_rng(seed).normal(size=(6, 6))
    f = np.random.default_rng(seed + 1).uniform(0.1, 2.0, size=(6, 6))
    assert constraint_value(-scale * u, f, beta) == pytest.approx(
        constraint_value(scale * u, f, beta), rel=1e-14)


@settings(max_examples=5)
@given(st.floats(0.3, 3.0), st.sampled_from([1.5, 2.0, 2.6]))
def test_scaling_covariance_of_the_infimum(c, beta):
    base = bump_problem(M=16, beta=beta, normal=60)
    t1 = minimize_subcritical(base, tol=1e-8).theta
    tc = minimize_subcritical(base.scaled_f(c), tol=1e-8).theta
    assert tc == pytest.approx(c ** (-2.0 / (beta + 1.0)) * t1, rel=1e-6)


def test_minimisers_are_nonnegative_and_satisfy_the_constraint():
    prob = bump_problem(M=16, beta=2.5, normal=60)
    res = minimize_subcritical(prob, init="random", seed=4)
    assert res.theta >= -1e-10
    assert np.all(res.u >= 0)
    assert constraint_value(res.u, prob.f, 2.5, prob.ext.cell) == pytest.approx(1.0, abs=1e-8)
    assert res.el_residual <= 1e-6


def test_random_and_constant_starts_agree():
    prob = bump_problem(M=16, beta=2.0, normal=60)
    a = minimize_subcritical(prob)
    b = minimize_subcritical(prob, init="random", seed=7)
    assert a.theta == pytest.approx(b.theta, rel=1e-7)


def test_continuation_monotone_and_flags_critical_run(tmp_path):
    prob = bump_problem(M=16, beta=1.5, normal=60)
    steps = beta_continuation(prob, [1.5, 2.5, 3.0])
    thetas = [s.theta for s in steps]
    assert thetas == sorted(thetas)
    assert SUPERCRITICAL_FLAG in steps[-1].result.flags
    assert SUPERCRITICAL_FLAG not in steps[0].result.flags
    path = tmp_path / "t.csv"
    write_telemetry(path, steps[0].result.history, {"n": 2, "beta": 1.5})
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["n", "beta", *TELEMETRY_COLUMNS]
    assert len(rows) == len(steps[0].result.history) + 1


def test_schedule_validation():
    prob = bump_problem(M=8, beta=1.5, normal=40)
    with pytest.raises(DomainError):
        beta_continuation(prob, [2.0, 1.5])
    with pytest.raises(DomainError):
        beta_continuation(prob, [1.5, 3.5])
    with pytest.raises(DomainError):
        ConstraintProblem(prob.ext, prob.f, 0.9)
    with pytest.raises(DomainError):
        ConstraintProblem(prob.ext, -np.ones(prob.ext.grid_shape), 2.0)


def test_criterion_levels():
    p = make_params(2, 0.5)
    bound = criterion_bound(p)
    assert bound == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert criterion_check(0.5 * bound, 1.0, p) == "strict"
    assert criterion_check(bound, 1.0, p) == "equal"
    assert criterion_check(2 * bound, 1.0, p) == "violated"
    # f_max^{(n-2g)/n} theta scales out
    assert criterion_check(bound / 4 ** 0.5 * 0.99, 4.0, p) == "strict"


def test_blowup_of_concentrating_bubbles():
    p = make_params(2, 0.5)
    # off-grid centre; scales small enough that the non-periodic tail is negligible
    L, M = 2 * math.pi, 128
    ax = np.arange(M) * L / M
    X = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1)
    ms = [2, 4, 8, 16]
    seq = [(3.0, w_eval(Bubble(p, 1.0 / m, np.array([2.0, 4.0])), X)) for m in ms]
    rep = blowup_diagnostics(seq, p, L, index=ms)
    assert rep.slope == pytest.approx(-1.0, abs=0.05)
    assert np.all(rep.correlations > 0.99)
    np.testing.assert_allclose(rep.lambdas, 1.0, rtol=0.05)
    np.testing.assert_allclose(rep.locations[-1], [2.0, 4.0], atol=0.01)


def test_blowup_of_flat_sequence_has_no_profile():
    p = make_params(2, 0.5)
    seq = [(2.0, np.ones((16, 16))), (2.5, np.ones((16, 16)))]
    rep = blowup_diagnostics(seq, p, 2 * math.pi)
    assert np.all(np.isnan(rep.correlations))
