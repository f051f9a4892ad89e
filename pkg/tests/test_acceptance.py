"""Exit criteria, one test per criterion, at the pinned protocol sizes
(100 trials, 50 datasets, 200 identification trials). Shared corpora are
cached on a module-scoped context so the Monte-Carlo work runs once.

Each test prints its one-line verdict so a plain ``pytest -s`` run doubles
as the acceptance report; the same machinery backs ``ddlqr verify``.
"""

import os

import pytest

from ddlqr import acceptance


@pytest.fixture(scope="module")
def ctx():
    jobs = int(os.environ.get("DDLQR_TEST_JOBS", "2"))
    return acceptance.AcceptanceContext(jobs=jobs)


def _check(result):
    print()
    print(result.line())
    assert result.passed, result.details


def test_criterion_1_noise_free_exactness(ctx):
    _check(acceptance.criterion_1(ctx))


def test_criterion_2_formulation_equivalence(ctx):
    _check(acceptance.criterion_2(ctx))


def test_criterion_3_exact_penalty(ctx):
    _check(acceptance.criterion_3(ctx))


def test_criterion_4_lambda_sweep_bands(ctx):
    _check(acceptance.criterion_4(ctx))


def test_criterion_5_noise_table_ce_row(ctx):
    _check(acceptance.criterion_5(ctx))


def test_criterion_6_noise_table_robust_mixed_rows(ctx):
    _check(acceptance.criterion_6(ctx))


def test_criterion_7_certificate_soundness(ctx):
    _check(acceptance.criterion_7(ctx))


def test_criterion_8_snr_scaling(ctx):
    _check(acceptance.criterion_8(ctx))


def test_criterion_9_identification_bound(ctx):
    _check(acceptance.criterion_9(ctx))


def test_criterion_10_property_suites(ctx):
    _check(acceptance.criterion_10(ctx))
