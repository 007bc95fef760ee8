"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line (run with ``pytest -s`` to see them all)
and asserts the stated tolerance.  The checks are driven through the same
verification suites exposed by ``canonflow verify``, so a green run here
matches a clean ``verify --suite all``.
"""

import time

import numpy as np
import pytest

from canonflow import verify


def report(number, title, checks):
    failed = [c for c in checks if not c.passed]
    status = "PASS" if not failed else "FAIL"
    worst = max((c for c in checks if c.kind == "assert"),
                key=lambda c: (c.residual / c.tolerance if c.tolerance else 0.0),
                default=None)
    extra = ""
    if worst is not None:
        extra = f" (worst {worst.name}: {worst.residual:.3e} vs {worst.tolerance:g})"
    print(f"ACCEPTANCE {number} {status}: {title}{extra}")
    for c in failed:
        print(f"    failed: {c.name} residual={c.residual:.3e} tol={c.tolerance:g}")
    assert not failed, f"criterion {number} failed: {[c.name for c in failed]}"


def test_acceptance_01_canonicality():
    start = time.perf_counter()
    checks = verify.suite_canonicality()
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"canonicality suite took {elapsed:.2f}s"
    report(1, "canonical products w * phi' = 1, closed and adaptive paths", checks)


def test_acceptance_02_closed_forms():
    checks = verify.suite_closed_forms()
    documented = [c for c in checks if c.kind == "documented"]
    assert any("variant" in c.name for c in documented), \
        "momentum-weight variant discrepancy must be logged"
    report(2, "closed-form position/momentum rules as printed, variant logged",
           checks)


def test_acceptance_03_bracket_identities():
    checks = verify.suite_brackets()
    report(3, "commutator identities on Gaussian probes, three generator pairs",
           checks)


def test_acceptance_04_reduction_chain():
    checks = verify.suite_reduction()
    report(4, "coefficient chain reduces the family to a static oscillator",
           checks)


def test_acceptance_05_exact_vs_numerical():
    checks = verify.suite_propagation()
    report(5, "exponential-mass oscillator: exact chain vs split-step at T=5",
           checks)


def test_acceptance_06_solvability_condition():
    checks = verify.suite_solvability()
    report(6, "constancy-condition residuals for 20 random families", checks)


def test_acceptance_07_static_spectrum():
    checks = verify.suite_spectrum()
    report(7, "grid spectrum of the reduced oscillator and eigenbasis phases",
           checks)


def test_acceptance_08_metric_equivalence():
    checks = verify.suite_metric_equivalence()
    report(8, "curved Crank-Nicolson vs conjugated free evolution", checks)


def test_acceptance_09_inverse_round_trip():
    checks = verify.suite_metric_inverse()
    report(9, "generator recovered from the metric: flow and metric round trip",
           checks)


def test_acceptance_10_gauge_and_affine():
    checks = verify.suite_gauge_affine()
    report(10, "gauge-invariant effective frequency; affine coefficient law",
           checks)
