"""Acceptance criteria 1-9 at their stated tolerances and runtime budgets.

Each test appends one PASS/FAIL line to the terminal summary. The Monte Carlo
criteria (5-8) run the shipped configs in ``configs/`` through the same path as
``ennlab experiment``; criterion 9 reruns them with worker processes and
compares the written files byte for byte.
"""
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ennlab.bounds import (BoundInputs, GrowthSchedule, deviation_bound, growth_condition_ratio,
                           identifiability_threshold, log_covering_bound)
from ennlab.cli import build_experiment, write_report
from ennlab.core import (Dataset, EnnParams, SieveSpec, grad_params, in_sieve, l1_norm,
                         project_l1_ball, project_sieve)
from ennlab.train import expectile_oracle, fit_constant
from test_core import fd_gradient, feasible_cloud, random_params, rel_err

CONFIGS = Path(__file__).parents[1] / "configs"
RUNS = {}


def record(k, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} [{elapsed:.1f} s, budget {budget:g} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def run_config(name, out, n_jobs=1):
    """Run configs/<name>.json, write the report under `out`, return (report, seconds)."""
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    start = time.perf_counter()
    report = build_experiment(cfg, int(cfg["seed"]), n_jobs)()
    elapsed = time.perf_counter() - start
    write_report(report, str(out))
    RUNS[name] = tuple((Path(out) / f).read_bytes() for f in ("report.json", "raw.csv"))
    return report, elapsed


def med(cell, key):
    return cell.aggregates[key]["median"]


def test_criterion_1_gradients():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d, r, n = int(rng.integers(1, 6)), int(rng.integers(1, 9)), int(rng.integers(1, 51))
        tau = float(rng.uniform(0.05, 0.95))
        params = random_params(rng, r, d)
        data = Dataset(rng.normal(size=(n, d)), rng.normal(size=n))
        analytic = grad_params(tau, params, data).to_vector()
        worst = max(worst, float(np.max(rel_err(analytic, fd_gradient(tau, params, data)))))
    elapsed = time.perf_counter() - start
    assert record(1, worst < 1e-5, f"max componentwise relative error {worst:.2e} < 1e-5",
                  elapsed, 10)


def test_criterion_2_expectile_oracle():
    rng = np.random.default_rng(102)
    taus = np.linspace(0.05, 0.95, 7)
    start = time.perf_counter()
    gap = mean_gap = 0.0
    monotone = True
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        y = rng.standard_t(3, n) * rng.uniform(0.1, 10) + rng.normal(0, 5)
        tau = float(rng.uniform(0.01, 0.99))
        gap = max(gap, abs(fit_constant(y, tau) - expectile_oracle(y, tau)))
        mean_gap = max(mean_gap, abs(fit_constant(y, 0.5) - y.mean()),
                       abs(expectile_oracle(y, 0.5) - y.mean()))
        path = [expectile_oracle(y, t) for t in taus]
        monotone &= all(b >= a - 1e-10 for a, b in zip(path, path[1:]))
    elapsed = time.perf_counter() - start
    ok = gap <= 1e-10 and mean_gap <= 1e-10 and monotone
    assert record(2, ok, f"method gap {gap:.1e}, tau=0.5 vs mean {mean_gap:.1e}, "
                  f"monotone={monotone}", elapsed, 5)


def _group_slices(r, d):
    """Index sets of (alpha0, alpha) and each (gamma_j, gamma0_j) in to_vector layout."""
    out = [np.arange(0, 1 + r)]
    for j in range(r):
        out.append(np.r_[1 + r + j * d + np.arange(d), 1 + r + r * d + j])
    return out


def test_criterion_3_projection():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    idem = 0.0
    feasible = minimal = True
    for _ in range(500):
        v = rng.normal(0, 5, int(rng.integers(1, 30)))
        radius = float(rng.uniform(0, 10))
        p = project_l1_ball(v, radius)
        feasible &= l1_norm(p) <= radius
        idem = max(idem, float(np.max(np.abs(project_l1_ball(p, radius) - p))))
    for _ in range(50):
        r, d = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        sieve = SieveSpec(r, float(rng.uniform(4, 6)), float(rng.uniform(0.5, 3)), d)
        params = random_params(rng, r, d, scale=4.0)
        proj = project_sieve(params, sieve)
        feasible &= in_sieve(proj, sieve)
        again = project_sieve(proj, sieve)
        idem = max(idem, float(np.max(np.abs(again.to_vector() - proj.to_vector()))))
        theta = params.to_vector()
        cloud = np.empty((10_000, theta.size))
        for k, idx in enumerate(_group_slices(r, d)):
            cloud[:, idx] = feasible_cloud(rng, idx.size, sieve.v if k == 0 else sieve.m, 10_000)
        best = float(np.min(np.sum((cloud - theta) ** 2, axis=1)))
        minimal &= float(np.sum((proj.to_vector() - theta) ** 2)) <= best
    elapsed = time.perf_counter() - start
    ok = idem <= 1e-12 and feasible and minimal
    assert record(3, ok, f"idempotence {idem:.1e}, exactly feasible={feasible}, "
                  f"beats 10,000 feasible points on 50 instances={minimal}", elapsed, 10)


def test_criterion_4_golden_values():
    start = time.perf_counter()
    sieve = SieveSpec(1, 8.0, 1.0, 1)
    cover = log_covering_bound(1.0, sieve)
    dev = deviation_bound(BoundInputs(1.0, 1000, 3.0, sieve))
    thr = identifiability_threshold(0.9, 1.0)
    growth = growth_condition_ratio(GrowthSchedule("power", 0.25, 1), 10_000)
    elapsed = time.perf_counter() - start
    ok = (abs(cover - 25.03) <= 0.01 and dev == 1.0 and abs(thr - 2.8284) <= 1e-4
          and abs(growth - 0.01065) <= 1e-5)
    assert record(4, ok, f"log covering {cover:.4f}, deviation {dev}, threshold {thr:.5f}, "
                  f"growth ratio {growth:.6f}", elapsed, 1)


@pytest.mark.slow
def test_criterion_5_ulln(tmp_path):
    report, elapsed = run_config("ulln", tmp_path)
    meds = [med(c, "sup_deviation") for c in report.cells]
    slope = next(c["value"] for c in report.checks if c["name"] == "fixed_deviation_loglog_slope")
    ok = all(b < a for a, b in zip(meds, meds[1:])) and -0.7 <= slope <= -0.3
    assert record(5, ok, "median sup-deviation " + " > ".join(f"{m:.4f}" for m in meds)
                  + f", fixed-function slope {slope:.3f} in [-0.7, -0.3]", elapsed, 300)


@pytest.mark.slow
def test_criterion_6_consistency(tmp_path):
    report, t1 = run_config("consistency", tmp_path / "noisy")
    noiseless, t2 = run_config("consistency_noiseless", tmp_path / "noiseless")
    parts, ok = [], True
    for tau in sorted({c.params["tau"] for c in report.cells}):
        cells = [c for c in report.cells if c.params["tau"] == tau]
        first, last = cells[0], cells[-1]
        ok &= med(last, "norm") < med(first, "norm")
        parts.append(f"tau={tau:g}: median ||f-f0||_n {med(first, 'norm'):.4f} -> "
                     f"{med(last, 'norm'):.4f} (to expectile curve "
                     f"{med(first, 'norm_to_expectile_curve'):.4f} -> "
                     f"{med(last, 'norm_to_expectile_curve'):.4f})")
    clean = med(noiseless.cells[0], "norm")
    ok &= clean < 0.05
    parts.append(f"noiseless n=1000 median {clean:.4f} < 0.05")
    assert record(6, ok, "; ".join(parts), t1 + t2, 900)


@pytest.mark.slow
def test_criterion_7_approximation(tmp_path):
    report, t1 = run_config("approximation", tmp_path / "sine")
    realizable, t2 = run_config("approximation_realizable", tmp_path / "enn")
    errs = [med(c, "l2_error") for c in report.cells]
    real = [med(c, "l2_error") for c in realizable.cells]
    ok = all(b <= a for a, b in zip(errs, errs[1:])) and max(real) < 1e-3
    rs = [c.params["r"] for c in report.cells]
    assert record(7, ok, "sine median L2(mu) error (integrated squared) " + ", ".join(
        f"r={r}: {e:.2e}" for r, e in zip(rs, errs)) + "; realizable "
        + ", ".join(f"{e:.2e}" for e in real) + " < 1e-3", t1 + t2, 300)


@pytest.mark.slow
def test_criterion_8_normality(tmp_path):
    report, elapsed = run_config("normality", tmp_path)
    agg = report.cells[0].aggregates
    crit = 1.63 / math.sqrt(report.cells[0].replications)
    ok = (abs(agg["v0"] - 1 / 12) < 1e-9 and agg["ks_statistic"] < 0.0729
          and agg["median_abs_centered_difference"] < agg["statistic_sd"])
    assert record(8, ok, f"v0 {agg['v0']:.6f}, KS {agg['ks_statistic']:.4f} < 0.0729 "
                  f"(1.63/sqrt(R) = {crit:.4f}), median |D| "
                  f"{agg['median_abs_centered_difference']:.4f} < sd(S) {agg['statistic_sd']:.4f}",
                  elapsed, 1800)


@pytest.mark.slow
def test_criterion_9_determinism(tmp_path):
    names = ["ulln", "consistency", "consistency_noiseless", "approximation",
             "approximation_realizable", "normality"]
    missing = [n for n in names if n not in RUNS]
    if missing:
        pytest.skip(f"first runs missing for {missing}; run the whole module")
    first = {n: RUNS[n] for n in names}
    jobs = max(2, os.cpu_count() or 1)
    start = time.perf_counter()
    same = {}
    for name in names:
        run_config(name, tmp_path / name, n_jobs=jobs)
        same[name] = RUNS[name] == first[name]
    elapsed = time.perf_counter() - start
    ok = all(same.values())
    bad = [n for n, s in same.items() if not s]
    assert record(9, ok, f"{len(names)} configs rerun with {jobs} worker processes: "
                  + ("report.json and raw.csv byte-identical" if ok else f"differ for {bad}"),
                  elapsed, 1800 + 900 + 300 + 300)
