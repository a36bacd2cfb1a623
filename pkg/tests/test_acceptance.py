"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The four Monte Carlo scenarios take several minutes each on one core.
"""

import io
import json
import math
import time

import numpy as np
import pytest

from mixorder.cli import main
from mixorder.criteria import CriterionSpec, penalty, scaled_gap, scaled_gap_closed_form
from mixorder.densities import GaussianFamily, GaussianParams, LaplaceFamily, LaplaceParams, RegressionFamily
from mixorder.fitter import MONOTONE_TOL, FitConfig, FitFailed, fit
from mixorder.mixture import MixtureParams, sample_mixture
from mixorder.selector import select
from mixorder.simulation import get_scenario, hellinger_1d, replicate_data, run_consistency
from mixorder.seeding import make_rng, split

BIC = CriterionSpec.bic()
NU3 = CriterionSpec.nu_bic(3)


def report(log, number, ok, detail, elapsed):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail} ({elapsed:.1f}s)"
    log.append(line)
    print(line, flush=True)


def cli_json(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out, stderr=io.StringIO())
    assert code == 0
    return json.loads(out.getvalue())


def test_01_thresholds(acceptance_log):
    t0 = time.perf_counter()
    nu = cli_json("thresholds", "--nu", "3")["thresholds"]
    eps = cli_json("thresholds", "--eps", "0.02")["thresholds"]
    lo, hi = nu[0]["threshold"], nu[1]["threshold"]
    exponent = eps[0]["log_threshold"]
    elapsed = time.perf_counter() - t0
    ok = (f"{lo:.1e}" == "3.8e+06" and f"{hi:.1e}" == "5.7e+08" and abs(exponent - 117.39) <= 0.01
          and elapsed < 1.0)
    report(acceptance_log, 1, ok, f"exp^3(1)={lo:.4g}, exp^3(1.1)={hi:.4g}, eps exponent={exponent:.4f}", elapsed)
    assert ok


def _random_dataset(i):
    rng = make_rng(split(777, i))
    n = int(rng.integers(100, 1501))
    k0 = int(rng.integers(1, 4))
    fam = [GaussianFamily(1), LaplaceFamily()][i % 2]
    locs = rng.uniform(-8, 8, k0)
    if isinstance(fam, LaplaceFamily):
        comps = [LaplaceParams(float(m), float(rng.uniform(0.5, 2))) for m in locs]
    else:
        comps = [GaussianParams.scalar(float(m), float(rng.uniform(0.3, 2))) for m in locs]
    psi = MixtureParams(rng.dirichlet(np.ones(k0) * 3), comps, fam)
    data, _ = sample_mixture(psi, n, rng)
    return fam, data


def test_02_bic_nu_bic_exactness(acceptance_log):
    t0 = time.perf_counter()
    bit_equal = all(penalty(NU3, k, m, n) == penalty(BIC, k, m, n)
                    for n in (10, 10**3, 10**6) for k in range(1, 11) for m in range(1, 11))
    same = 0
    cfg = FitConfig(restarts=2, max_iters=200)
    for i in range(50):
        fam, data = _random_dataset(i)
        cfg_i = FitConfig(restarts=cfg.restarts, max_iters=cfg.max_iters, base_seed=i)
        a = select(data, fam, 3, BIC, cfg_i).selected
        b = select(data, fam, 3, NU3, cfg_i).selected
        same += a == b
    elapsed = time.perf_counter() - t0
    ok = bit_equal and same == 50 and elapsed < 120
    report(acceptance_log, 2, ok, f"penalties bit-equal={bit_equal}, identical selections {same}/50", elapsed)
    assert ok


def test_03_b2_identities(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for spec in (NU3, CriterionSpec.nu_bic(1), CriterionSpec.nu_bic(2), CriterionSpec.eps_bic(0.02)):
        for k in range(1, 6):
            for l in range(k + 1, 6):
                for e in range(2, 9):
                    n = 10**e
                    got = scaled_gap(spec, k, l, 2, n)
                    want = scaled_gap_closed_form(spec, k, l, 2, n)
                    worst = max(worst, abs(got - want) / abs(want))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    report(acceptance_log, 3, ok, f"max relative deviation {worst:.2e}", elapsed)
    assert ok


def _accuracies(table, label, grid):
    return [table.row(label, n).accuracy for n in grid]


def _flags(table):
    return sum(d["projection_flags"] for d in table.details), sum(d["monotonicity_violations"] for d in table.details)


@pytest.mark.slow
def test_04_gaussian_consistency(acceptance_log):
    cfg = get_scenario("gaussian-2comp")
    t0 = time.perf_counter()
    table = run_consistency(cfg)
    elapsed = time.perf_counter() - t0
    acc = _accuracies(table, "nu-bic:3", cfg.n_grid)
    trend = all(b >= a - 0.05 for a, b in zip(acc, acc[1:]))
    flags, viol = _flags(table)
    ok = acc[-1] >= 0.95 and trend and elapsed < 600
    report(acceptance_log, 4, ok, f"nu-bic:3 accuracy over n={list(cfg.n_grid)}: {acc}; "
           f"flagged iterations {flags}, violations {viol}", elapsed)
    assert ok


@pytest.mark.slow
def test_05_laplace_consistency(acceptance_log):
    cfg = get_scenario("laplace-2comp")
    t0 = time.perf_counter()
    table = run_consistency(cfg)
    elapsed = time.perf_counter() - t0
    acc = _accuracies(table, "eps-bic:0.02", cfg.n_grid)
    flags, viol = _flags(table)
    ok = acc[-1] >= 0.90 and elapsed < 600
    report(acceptance_log, 5, ok, f"eps-bic:0.02 accuracy over n={list(cfg.n_grid)}: {acc}; "
           f"flagged iterations {flags}, violations {viol}", elapsed)
    assert ok


@pytest.mark.slow
def test_06_regression_consistency(acceptance_log):
    cfg = get_scenario("regression-2line")
    t0 = time.perf_counter()
    table = run_consistency(cfg)
    elapsed = time.perf_counter() - t0
    row = table.row("bic", 1000)
    ok = row.accuracy >= 0.90 and elapsed < 600
    report(acceptance_log, 6, ok, f"bic accuracy at n=1000: {row.accuracy} "
           f"({row.correct}/{row.replicates}, failed {row.failed})", elapsed)
    assert ok


@pytest.mark.slow
def test_07_null_and_aic(acceptance_log):
    cfg = get_scenario("gaussian-1comp-null")
    t0 = time.perf_counter()
    table = run_consistency(cfg)
    elapsed = time.perf_counter() - t0
    bic, aic = table.row("bic", 5000), table.row("aic", 5000)
    ok = bic.accuracy >= 0.95 and aic.mean_k >= bic.mean_k and elapsed < 600
    report(acceptance_log, 7, ok, f"bic accuracy {bic.accuracy}, mean k: aic {aic.mean_k:.3f} >= bic "
           f"{bic.mean_k:.3f}", elapsed)
    assert ok


def test_08_em_monotonicity(acceptance_log):
    t0 = time.perf_counter()
    names = ["gaussian-2comp", "laplace-2comp", "regression-2line"]
    fits = failed = violations = flagged = trace_bad = 0
    for i in range(100):
        cfg = get_scenario(names[i % 3])
        data = replicate_data(cfg, 500, 10_000 + i)
        k = 2 + i % 2
        try:
            res = fit(data, cfg.truth.family, k, cfg.space, FitConfig(restarts=2, base_seed=i))
        except FitFailed:
            failed += 1
            continue
        fits += 1
        violations += res.monotonicity_violations
        flagged += res.projection_flags
        if res.projection_flags == 0:
            trace_bad += int(np.any(np.diff(res.risk_trace) > MONOTONE_TOL))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and trace_bad == 0 and fits >= 90 and elapsed < 300
    report(acceptance_log, 8, ok, f"{fits} fits ({failed} failed), unflagged violations {violations}, "
           f"flagged iterations {flagged}", elapsed)
    assert ok


def test_09_hellinger_oracle(acceptance_log):
    t0 = time.perf_counter()
    g1 = GaussianFamily(1)
    worst = 0.0
    for mu in (0.5, 1.0, 2.0, 4.0):
        f = MixtureParams([1.0], [GaussianParams.scalar(0.0, 1.0)], g1)
        g = MixtureParams([1.0], [GaussianParams.scalar(mu, 1.0)], g1)
        worst = max(worst, abs(hellinger_1d(f, g) - math.sqrt(1 - math.exp(-mu * mu / 8))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 1.0
    report(acceptance_log, 9, ok, f"max absolute error {worst:.2e}", elapsed)
    assert ok


def test_10_closed_form_mle(acceptance_log):
    t0 = time.perf_counter()
    errs = []
    x = np.array([2.3, -0.7, 1.1, 4.8, 0.2, 3.3, -1.9])
    g = fit(x, GaussianFamily(1), 1).params.components[0]
    errs += [abs(g.mean[0] - x.mean()), abs(g.cov[0, 0] - x.var())]
    lap = fit(x, LaplaceFamily(), 1).params.components[0]
    med = np.median(x)
    errs += [abs(lap.loc - med), abs(lap.rate - 1 / np.mean(np.abs(x - med)))]
    u = np.column_stack([np.ones(7), [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]])
    fam = RegressionFamily(2)
    reg = fit(fam.stack(u, x), fam, 1).params.components[0]
    coef, rss = np.linalg.lstsq(u, x, rcond=None)[:2]
    errs += list(np.abs(reg.coef - coef)) + [abs(reg.sd**2 - rss[0] / 7)]
    elapsed = time.perf_counter() - t0
    worst = max(errs)
    ok = worst <= 1e-10 and elapsed < 1.0
    report(acceptance_log, 10, ok, f"max absolute error {worst:.2e} (gaussian, laplace, regression)", elapsed)
    assert ok
