"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` to see the summary lines.
"""

from time import perf_counter

import numpy as np
import pytest

from tlx.experiment import ExperimentConfig, rows_to_csv, run_experiment
from tlx.penalty import numeric_dir_deriv, trimmed_l1_dir_deriv, trimmed_l1_value
from tlx.problems import difference_matrix, generate_instance, make_problem
from tlx.prox import SeparableAddon, prox_bruteforce, prox_trimmed_l1
from tlx.solvers import SolverConfig, solve, solve_dca, solve_pgm
from tlx.stationarity import PROBE_TOL, counterexample_report, local_opt_sample_check
from tlx.thresholds import certify, select_gamma, trend_sigma_bound

VECTOR_FAMILIES = ("sparse_ols", "power1", "logistic", "svm", "robust_reg", "mcv", "trend_filter", "nonneg_ols")
MATRIX_FAMILIES = ("matrix_completion", "multiclass", "robust_pca")
SEEDS = tuple(range(10))


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def vector_sweep():
    """Criterion 1's sweep: CSV text per family and the elapsed time."""
    start = perf_counter()
    out = {}
    for family in VECTOR_FAMILIES:
        out[family] = run_experiment(ExperimentConfig(family, seeds=SEEDS, gamma_grid=(1.001,)))
    return out, perf_counter() - start


@pytest.fixture(scope="module")
def first_sweep():
    return vector_sweep()


def test_criterion_1_vector_exact_penalty(first_sweep, report):
    sweeps, elapsed = first_sweep
    runs = passed = covered = 0
    for family, rows in sweeps.items():
        for seed in SEEDS:
            blocks = [r for r in rows if r.seed == seed]
            runs += 1
            covered += all(r.headline_applies for r in blocks)
            passed += all(r.headline_ok for r in blocks)
    ok = passed == runs == 80 and elapsed < 60
    report(1, ok, f"{passed}/{runs} runs pass, {covered} converged with probe pass, {elapsed:.1f} s")


def test_criterion_2_matrix_rank(report):
    start = perf_counter()
    runs = passed = converged = 0
    for family in MATRIX_FAMILIES:
        for row in run_experiment(ExperimentConfig(family, seeds=SEEDS, gamma_grid=(1.001,))):
            runs += 1
            converged += bool(row.converged)
            passed += row.status == "ok" and row.final_cardinality_or_rank <= row.K
    elapsed = perf_counter() - start
    ok = passed == runs == 30 and elapsed < 120
    report(2, ok, f"{passed}/{runs} ranks within K, {converged} converged, {elapsed:.1f} s")


def _addon(rng, kind, size, p):
    if kind == "l1":
        return SeparableAddon.l1(rng.uniform(0, 1))
    if kind == "box":
        lo = rng.uniform(-2, 0.5, size)
        return SeparableAddon.box(lo, lo + rng.uniform(0, 3, size))
    if kind == "nonneg":
        return SeparableAddon.nonneg(rng.random(size) < 0.7 if p == 1 else None)
    return SeparableAddon.none()


def test_criterion_3_prox_oracle(report):
    rng = np.random.default_rng(2024)
    draws = matched = 0
    for kind in ("none", "l1", "box", "nonneg"):
        for _ in range(200):
            # the box add-on acts on scalars, so its draws use p = 1
            p = 1 if kind == "box" else int(rng.integers(1, 3))
            m = int(rng.integers(1, 9))
            K = int(rng.integers(0, m))
            x = rng.normal(0, 2, m * p)
            gamma = rng.uniform(0.05, 3)
            addon = _addon(rng, kind, m * p, p)
            fast = prox_trimmed_l1(x, K, gamma, addon, p).objective
            slow = prox_bruteforce(x, K, gamma, addon, p).objective
            draws += 1
            matched += abs(fast - slow) <= 1e-12 * max(1.0, abs(slow))
    report(3, matched == draws == 800, f"{matched}/{draws} draws within 1e-12")


def test_criterion_4_directional_derivative(report):
    rng = np.random.default_rng(7)
    total = agree = 0
    for k in range(120):
        m, p = int(rng.integers(2, 7)), int(rng.integers(1, 3))
        zg = rng.standard_normal((m, p))
        if k >= 100:
            zg[1] = -zg[0][::-1]  # equal group norms, bit for bit
            zg[2:][rng.random(m - 2) < 0.3] = 0.0
        K = int(rng.integers(0, m))
        z, d = zg.ravel(), rng.standard_normal(m * p)
        est = numeric_dir_deriv(lambda v: trimmed_l1_value(v, K, p), z, d).value
        total += 1
        agree += abs(trimmed_l1_dir_deriv(z, K, d, p) - est) <= 1e-6
    report(4, agree == total == 120, f"{agree}/{total} points within 1e-6 (20 at ties)")


def test_criterion_5_difference_identities(report):
    bad = []
    for n in range(3, 51):
        D = difference_matrix(1, n)
        if abs(np.linalg.eigvalsh(D @ D.T)[0] - 2 * (1 - np.cos(np.pi / n))) > 1e-9:
            bad.append(("eig", n))
    for n in range(4, 51):
        if np.linalg.svd(difference_matrix(2, n), compute_uv=False)[-1] < trend_sigma_bound(n):
            bad.append(("sigma", n))
    report(5, not bad, f"{len(bad)} violations")


def test_criterion_6_counterexample(report):
    rep = counterexample_report(1.0, radius=0.5, samples=500)
    ok = (rep["probe_residual"] >= -PROBE_TOL and rep["max_decrease"] >= 0.009
          and rep["h_max_deviation"] <= 1e-4)
    report(6, ok, f"probe residual {rep['probe_residual']:.2e}, max decrease {rep['max_decrease']:.4f}, "
                  f"h-curve deviation {rep['h_max_deviation']:.1e}")


def test_criterion_7_dca_pathology(report):
    P = make_problem("sparse_ols", K=1, A=np.eye(2), b=np.array([3.0, 1.0]))
    dca = solve_dca(P, 3.2, SolverConfig("dca", min_iter=100, max_iter=100))
    pgm = solve_pgm(P, 3.2)
    dca_ok = dca.iterations == 100 and dca.extras["support_changes"] == 0 and not dca.final_point.any()
    pgm_ok = np.array_equal(pgm.final_point, [3.0, 0.0]) and pgm.cardinality == (1,)
    report(7, dca_ok and pgm_ok, f"DCA {dca.extras['support_changes']} support changes in {dca.iterations} "
                                 f"iterations at {dca.final_point.tolist()}, PGM at {pgm.final_point.tolist()}")


def test_criterion_8_local_optimality(report):
    points = []
    for seed in range(40):
        for family in ("sparse_ols", "logistic", "nonneg_ols", "robust_reg"):
            P = generate_instance(family, seed=seed)
            gammas = select_gamma(certify(P), 0.3 if seed % 2 else 1.001)
            rep = solve(P, gammas)
            if rep.converged and rep.stationarity_residual >= -PROBE_TOL:
                points.append((P, gammas, rep.final_point))
            if len(points) == 50:
                break
        if len(points) == 50:
            break
    passed = sum(local_opt_sample_check(P, g, x, radius=1e-4, samples=500, seed=i).passed
                 for i, (P, g, x) in enumerate(points))
    report(8, passed == len(points) == 50, f"{passed}/{len(points)} points show no sampled descent")


def test_criterion_9_determinism(first_sweep, report):
    again, _ = vector_sweep()
    first, _ = first_sweep
    same = sum(rows_to_csv(first[f]) == rows_to_csv(again[f]) for f in VECTOR_FAMILIES)
    report(9, same == len(VECTOR_FAMILIES), f"{same}/{len(VECTOR_FAMILIES)} family CSVs byte-identical")
