"""Harness behavior: determinism, paired seeds, summary statistics, CSV
schemas, and the scaling report flags."""

import numpy as np
import pytest

from ddlqr.bench import (
    SweepResult,
    SweepSummary,
    TrialMetrics,
    run_trial,
    snr_scaling_report,
    summarize,
    sweep_lambda,
    sweep_noise,
    table2_methods,
    write_summary_csv,
    write_trials_csv,
)
from ddlqr.design import Method, model_lqr
from ddlqr.errors import InvalidInput
from ddlqr.system import laplacian3, laplacian3_weights

SYS = laplacian3()
W = laplacian3_weights()
COST_STAR = model_lqr(SYS, W).objective


def test_run_trial_noise_free():
    tm = run_trial(SYS, W, 20, 0.0, Method("direct_regularized", lam=0.01), seed=1, cost_star=COST_STAR)
    assert tm.stabilizing
    assert tm.error is not None and 0.0 - 1e-9 <= tm.error <= 1e-6
    assert tm.snr_db == np.inf
    assert tm.failure_cause == ""


def test_run_trial_deterministic():
    a = run_trial(SYS, W, 20, 0.3, Method("indirect_ce"), seed=5, cost_star=COST_STAR)
    b = run_trial(SYS, W, 20, 0.3, Method("indirect_ce"), seed=5, cost_star=COST_STAR)
    assert a == b


def test_run_trial_error_presence_matches_stabilizing():
    for seed in range(6):
        tm = run_trial(SYS, W, 20, 1.0, Method("direct_regularized", lam=0.01), seed=seed, cost_star=COST_STAR)
        assert (tm.error is not None) == tm.stabilizing
        if tm.error is not None:
            assert tm.error >= -1e-9


def test_sweep_lambda_single_trial_noise_free():
    results = sweep_lambda(SYS, W, 20, 0.0, [1e-4, 1e-2, 1.0], trials=1, master_seed=10)
    for r in results:
        assert r.summary.S == 100.0
        assert r.summary.M <= 1e-6


def test_sweep_lambda_shares_datasets_across_coefficients():
    results = sweep_lambda(SYS, W, 20, 0.1, [1e-3, 1.0], trials=3, master_seed=11)
    snr_a = [t.snr_db for t in results[0].trials]
    snr_b = [t.snr_db for t in results[1].trials]
    assert snr_a == snr_b
    assert [t.seed for t in results[0].trials] == [11, 12, 13]


def test_sweep_noise_paired_seeds_across_methods():
    methods = table2_methods()
    results = sweep_noise(SYS, W, 20, [0.1], methods, trials=3, master_seed=12)
    assert len(results) == 3
    snrs = [[t.snr_db for t in r.trials] for r in results]
    assert snrs[0] == snrs[1] == snrs[2]


def test_summary_quartile_ordering():
    results = sweep_noise(SYS, W, 20, [0.3], [("ce", Method("direct_regularized", lam=0.01))],
                          trials=12, master_seed=13)
    s = results[0].summary
    assert 0.0 <= s.S <= 100.0
    assert s.min <= s.q1 <= s.M <= s.q3 <= s.max


def test_csv_schema_and_determinism(tmp_path):
    results = sweep_lambda(SYS, W, 20, 0.1, [1e-2], trials=3, master_seed=14)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trials_csv(results, p1)
    write_trials_csv(sweep_lambda(SYS, W, 20, 0.1, [1e-2], trials=3, master_seed=14), p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "method,sigma,lambda,rho,trial,seed,snr_db,stabilizing,error,failure_cause"
    s = tmp_path / "s.csv"
    write_summary_csv(results, s)
    assert s.read_text().splitlines()[0] == "method,sigma,lambda,rho,trials,S,M,q1,q3,min,max"


def test_parallel_matches_serial(tmp_path):
    serial = sweep_lambda(SYS, W, 20, 0.1, [1e-2], trials=4, master_seed=15, jobs=1)
    parallel = sweep_lambda(SYS, W, 20, 0.1, [1e-2], trials=4, master_seed=15, jobs=2)
    p1, p2 = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    write_trials_csv(serial, p1)
    write_trials_csv(parallel, p2)
    assert p1.read_bytes() == p2.read_bytes()


def _synthetic_results(medians, sigmas, snr_dbs):
    out = []
    for med, sig, db in zip(medians, sigmas, snr_dbs):
        trials = tuple(
            TrialMetrics(method="ce", sigma=sig, lam=0.01, rho=0.0, trial=i, seed=i,
                         snr_db=db, stabilizing=True, error=med)
            for i in range(5)
        )
        out.append(SweepResult(summary=summarize(list(trials), "ce", sig, 0.01, 0.0), trials=trials))
    return out


def test_snr_report_on_published_medians():
    # medians from the reference noise table rows at sigma = 0.01 / 0.1 / 0.3
    results = _synthetic_results([2.5599e-5, 0.0026, 0.0237], [0.01, 0.1, 0.3], [16.0, 6.0, 1.5])
    report = snr_scaling_report(results)
    assert report.monotone_ok
    assert report.slope_ok
    assert 0.8 <= report.slope <= 2.2


def test_snr_report_flags_constant_medians():
    results = _synthetic_results([1e-3, 1e-3, 1e-3], [0.01, 0.1, 0.3], [16.0, 6.0, 1.5])
    report = snr_scaling_report(results)
    assert not report.monotone_ok
    assert not report.slope_ok
    assert not report.ok


def test_snr_report_requires_grid():
    single = _synthetic_results([1e-3], [0.1], [6.0])
    with pytest.raises(InvalidInput):
        snr_scaling_report(single)
    two_large = _synthetic_results([1e-3, 2e-3, 3e-3], [0.1, 0.3, 1.0], [6.0, 1.5, -3.0])
    with pytest.raises(InvalidInput):
        snr_scaling_report(two_large)
