import json

import numpy as np
import pytest

from tlx import solvers
from tlx.errors import CapabilityError, InputError, VerificationError
from tlx.problems import generate_instance, loss_profile, make_problem
from tlx.prox import prox_bruteforce
from tlx.solvers import (
    SolverConfig,
    largest_k_subgradient,
    solve,
    solve_dca,
    solve_padmm,
    solve_pgm,
    solve_sparsa,
)
from tlx.stationarity import PROBE_TOL
from tlx.thresholds import certify, select_gamma


@pytest.fixture
def toy():
    return make_problem("sparse_ols", K=1, A=np.eye(2), b=np.array([3.0, 1.0]))


def window_max(values, w):
    return [max(values[max(0, k - w + 1):k + 1]) for k in range(len(values))]


# -- fixed-point instance ------------------------------------------------------------


@pytest.mark.parametrize("solver", [solve_pgm, solve_sparsa])
def test_prox_gradient_reaches_fixed_point(toy, solver):
    rep = solver(toy, 3.2)
    np.testing.assert_array_equal(rep.final_point, [3.0, 0.0])
    assert rep.iterations <= 2
    assert rep.converged
    assert rep.cardinality == (1,)
    assert rep.stationarity_residual >= 0
    # the prox of the penalty at b is the point itself
    np.testing.assert_array_equal(prox_bruteforce([3.0, 1.0], 1, 3.2).point, [3.0, 0.0])


def test_admm_reaches_fixed_point(toy):
    rep = solve_padmm(toy, 3.2)
    np.testing.assert_allclose(rep.final_point, [3.0, 0.0], atol=1e-6)
    assert rep.extras["mode"] == "composite"


def test_dca_stalls_at_origin(toy):
    rep = solve_dca(toy, 3.2, SolverConfig("dca", min_iter=100))
    np.testing.assert_array_equal(rep.final_point, [0.0, 0.0])
    assert rep.extras["stagnated"]
    assert rep.extras["support_changes"] == 0
    assert rep.iterations == 100
    assert rep.stationarity_residual == pytest.approx(-3.0)


def test_dca_agrees_with_pgm_below_gap():
    P = generate_instance("sparse_ols", seed=4, noise=0.01)
    x0 = P.truth["x"]
    g = 0.05
    dca = solve_dca(P, g, SolverConfig("dca", x0=x0))
    pgm = solve_pgm(P, g, SolverConfig("pgm", x0=x0))
    assert dca.objective == pytest.approx(pgm.objective, abs=1e-6)


def test_largest_k_subgradient_tie_break():
    np.testing.assert_array_equal(largest_k_subgradient(np.array([1.0, -2.0, 2.0, 0.5]), 1), [0, -1, 0, 0])
    np.testing.assert_array_equal(largest_k_subgradient(np.array([1.0, -2.0, 2.0, 0.5]), 2), [0, -1, 1, 0])


# -- per-solver behavior -------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_pgm_objective_nonincreasing(seed):
    P = generate_instance("logistic", seed=seed)
    rep = solve_pgm(P, select_gamma(certify(P), 0.5), SolverConfig("pgm", trace=True))
    F = [row[1] for row in rep.trace]
    assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(F, F[1:]))
    assert rep.trace_summary["monotone"]


@pytest.mark.parametrize("seed", range(5))
def test_sparsa_window_max_nonincreasing(seed):
    P = generate_instance("logistic", seed=seed)
    cfg = SolverConfig("sparsa", trace=True, nonmonotone_window=5)
    rep = solve_sparsa(P, select_gamma(certify(P), 0.5), cfg)
    W = window_max([row[1] for row in rep.trace], 5)
    assert all(b <= a for a, b in zip(W, W[1:]))


def test_sparsa_bb_step_on_quadratic():
    P = generate_instance("sparse_ols", seed=0)
    A, b = P.data["A"], P.data["b"]
    rep = solve_sparsa(P, 0.0, SolverConfig("sparsa", max_iter=2))
    t0 = 1.0 / np.linalg.norm(A, 2) ** 2
    s = t0 * (A.T @ b)  # first step from the origin
    y = A.T @ (A @ s)
    assert rep.extras["steps"][0] == t0
    assert rep.extras["steps"][1] == pytest.approx(s @ s / (s @ y), rel=1e-12)


def test_zero_gamma_is_gradient_descent():
    P = generate_instance("sparse_ols", seed=1, q=30, n=5)
    rep = solve_pgm(P, 0.0, SolverConfig("pgm", tol=1e-12))
    lsq = np.linalg.lstsq(P.data["A"], P.data["b"], rcond=None)[0]
    np.testing.assert_allclose(rep.final_point, lsq, atol=1e-8)


def test_admm_on_exactly_linear_trend():
    b = 0.5 + 0.25 * np.arange(12.0)
    P = make_problem("trend_filter", K=1, b=b)
    rep = solve_padmm(P, 0.3)
    np.testing.assert_allclose(rep.final_point, b, atol=1e-6)
    assert rep.penalty_values[0] <= 1e-8
    assert rep.converged


def test_admm_matches_pgm_on_identity_mcv():
    b = np.random.default_rng(0).standard_normal(6)
    P = make_problem("mcv", K=2, D=np.eye(6), b=b, c=np.zeros(6))
    assert solve_padmm(P, 0.5).objective == pytest.approx(solve_pgm(P, 0.5).objective, abs=1e-6)


def test_svm_toy_is_sparse():
    P = make_problem("svm", K=1, A=np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]]), b=np.array([1.0, -1.0]))
    rep = solve(P, select_gamma(certify(P)))
    assert rep.converged
    assert np.count_nonzero(rep.final_point) <= 1


def test_matrix_completion_rank_bound():
    P = generate_instance("matrix_completion", seed=1)
    rep = solve(P, select_gamma(certify(P)))
    assert rep.cardinality[0] <= P.K[0]


def test_prox_iterates_have_literal_zeros():
    P = generate_instance("sparse_ols", seed=2)
    rep = solve(P, select_gamma(certify(P)))
    assert rep.cardinality == (np.count_nonzero(rep.final_point),)
    assert rep.cardinality[0] <= P.K[0]


@pytest.mark.parametrize("family", ["sparse_ols", "logistic", "nonneg_ols"])
def test_prox_gradient_solvers_agree(family):
    compared = 0
    for seed in range(20):
        P = generate_instance(family, seed=seed, n=8)
        g = select_gamma(certify(P), 0.3)
        a, b = solve_pgm(P, g), solve_sparsa(P, g)
        # different supports mean different d-stationary points; separable
        # logistic draws have no minimizer and never converge
        if not (a.converged and b.converged) or not np.array_equal(a.final_point != 0, b.final_point != 0):
            continue
        compared += 1
        assert a.objective == pytest.approx(b.objective, abs=1e-5)
    assert compared >= 5


@pytest.mark.parametrize("family", ["sparse_ols", "logistic", "robust_reg", "nonneg_ols", "svm", "mcv"])
def test_converged_points_pass_probe(family):
    P = generate_instance(family, seed=3)
    rep = solve(P, select_gamma(certify(P)))
    assert rep.converged
    assert rep.stationarity_residual >= -PROBE_TOL


def test_reports_are_deterministic():
    P = generate_instance("nmf_cluster", seed=0)
    g = select_gamma(certify(P))
    a = solve(P, g, solvers.default_config(P, seed=3))
    b = solve(P, g, solvers.default_config(P, seed=3))
    assert a.final_point.tobytes() == b.final_point.tobytes()
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_random_start_respects_nonnegativity():
    P = generate_instance("nonneg_ols", seed=0)
    rep = solve_pgm(P, 0.1, SolverConfig("pgm", x0="random", max_iter=1))
    assert np.all(rep.final_point >= 0)


# -- errors --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "overrides",
    [
        {"algorithm": "newton"},
        {"tol": 0.0},
        {"nonmonotone_window": 0},
        {"max_iter": 0},
        {"step": -1.0},
        {"rho": 0.0},
        {"bb_clip": (2.0, 1.0)},
    ],
)
def test_config_validation(overrides):
    with pytest.raises(InputError):
        SolverConfig(**overrides)


def test_bad_gammas(toy):
    with pytest.raises(InputError):
        solve_pgm(toy, [1.0, 2.0])
    with pytest.raises(InputError):
        solve_pgm(toy, -1.0)
    with pytest.raises(InputError):
        solve_pgm(toy, 1.0, SolverConfig("pgm", x0="ones"))


@pytest.mark.parametrize(
    "family, solver",
    [
        ("svm", solve_pgm),
        ("portfolio", solve_pgm),
        ("sparse_eigen", solve_sparsa),
        ("mcv", solve_pgm),
        ("robust_reg", solve_dca),
        ("multiclass", solve_padmm),
        ("nonneg_ols", solve_padmm),
        ("nmf_cluster", solve_padmm),
    ],
)
def test_capability_errors(family, solver):
    P = generate_instance(family, seed=0)
    with pytest.raises(CapabilityError):
        solver(P, 1.0)


def test_divergence_watch_ignores_noise_and_flags_growth():
    watch = solvers._DivergenceWatch()
    for _ in range(200):
        watch(1e-9, 1.0)
    watch = solvers._DivergenceWatch()
    with pytest.raises(solvers._Diverged):
        for k in range(200):
            watch(1.0 * 1.05 ** k, 1.0)


def test_admm_doubles_rho_then_gives_up(monkeypatch):
    seen = []

    def always_diverges(problem, gammas, config, rho, attempt):
        seen.append(rho)
        raise solvers._Diverged([1.0])

    monkeypatch.setattr(solvers, "_admm_split", always_diverges)
    P = generate_instance("svm", seed=0)
    with pytest.raises(VerificationError, match="doublings"):
        solve_padmm(P, 1.0, SolverConfig("padmm", rho=1.0))
    assert seen == [2.0 ** k for k in range(11)]


def test_smoothness_constant_recorded():
    P = generate_instance("sparse_ols", seed=0)
    assert solve_pgm(P, 0.1).extras["step"] == pytest.approx(1.0 / loss_profile(P).smooth)
