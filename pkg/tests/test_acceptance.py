"""One test per acceptance criterion; each prints a PASS/FAIL line."""

from __future__ import annotations

import pytest

from fracyam.acceptance import run_criteria

LINES: list[str] = []

# wall-clock budgets in seconds
BUDGET = {1: 1, 2: 10, 3: 1, 4: 30, 5: 300, 6: 300, 7: 600, 8: 60, 9: 120, 10: 600, 11: 60,
          12: 1800}


def _check(number: int) -> None:
    (res,) = run_criteria([number], seed=0)
    LINES.append(res.line())
    print(res.line())
    assert res.seconds < BUDGET[number], f"criterion {number} over its time budget"
    assert res.passed, res.detail


def test_criterion_01_constants():
    _check(1)


def test_criterion_02_bubble_trace_identity():
    _check(2)


def test_criterion_03_bubble_neumann_law():
    _check(3)


def test_criterion_04_neumann_symbol():
    _check(4)


def test_criterion_05_non_umbilic_expansion():
    _check(5)


def test_criterion_06_umbilic_third_order_expansion():
    _check(6)


def test_criterion_07_flat_boundary_fourth_order_expansion():
    _check(7)


def test_criterion_08_ratio_identities():
    _check(8)


def test_criterion_09_f_expansions():
    _check(9)


@pytest.mark.slow
def test_criterion_10_minimisation():
    _check(10)


def test_criterion_11_blowup_diagnostics():
    _check(11)


@pytest.mark.slow
def test_criterion_12_determinism():
    _check(12)
