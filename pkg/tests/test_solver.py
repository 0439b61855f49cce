from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from conftest import PUB_S1, PUB_S2, PUB_W1, PUB_W2, match_rows
from contract_lab.errors import InvalidScenario, NoConvergence
from contract_lab.generators import RandomScenario
from contract_lab.geometry import affine_from_graph, barycentric_coords, simplex_grid
from contract_lab.model import DecisionProblem, Experiment, QuadraticCost, ShannonCost, TypeSpace, value_at
from contract_lab.solver import (
    CONCAVIFY_LP,
    SolverConfig,
    concavify,
    entropy_fixed_point,
    objective_value,
    reduce_support,
    relaxed_objective,
    solve_choice_function,
    solve_entropy_fixed_point,
)

P0 = np.full(3, 1 / 3)


@pytest.fixture(scope="module")
def D1():
    return DecisionProblem(("w1", "w2", "w3"), ("a1", "a2", "a3"), np.array([[5, 4, 2], [0, 5, 3], [5, 1, 5]], float), P0)


def assert_matches_published(tau, S, w, post_tol=5e-3, prob_tol=2e-2):
    assert tau.size == 3
    perm = match_rows(tau.support, S)
    assert np.max(np.abs(tau.support[perm] - S)) <= post_tol
    assert np.max(np.abs(tau.probs[perm] - w)) <= prob_tol


def test_fixed_point_reproduces_published_posteriors(D1):
    assert_matches_published(solve_entropy_fixed_point(D1, 2.5), PUB_S1, PUB_W1)
    assert_matches_published(solve_entropy_fixed_point(D1, 2.0), PUB_S2, PUB_W2)


def test_fixed_point_is_bayes_plausible_and_optimal(D1):
    c = ShannonCost(P0)
    G = simplex_grid(3, 128)
    for lam in (2.5, 2.0):
        tau = solve_entropy_fixed_point(D1, lam)
        np.testing.assert_allclose(tau.mean(), P0, atol=1e-9)
        # geometric certificate: the chord through a full-dimension support dominates phi everywhere
        phi = relaxed_objective(D1, c, lam)
        h = affine_from_graph(tau.support, phi(tau.support))
        assert np.max(phi(G) - h(G)) <= 1e-7


def test_fixed_point_beats_grid_lower_bound(D1):
    # with two retained actions the chord is not unique; the grid LP bounds the optimum from below
    c = ShannonCost(P0)
    tau = solve_entropy_fixed_point(D1, 1.0)
    assert tau.size == 2
    np.testing.assert_allclose(tau.mean(), P0, atol=1e-9)
    phi = relaxed_objective(D1, c, 1.0)
    assert tau.expectation(phi) >= concavify(phi, P0, resolution=128).value - 1e-9


def test_fixed_point_no_learning_limit():
    D = DecisionProblem(("w1", "w2", "w3"), ("a1", "a2", "a3"), np.array([[5, 4, 2], [0, 5, 3], [5, 1, 4]], float), P0)
    tau = solve_entropy_fixed_point(D, 1e6)
    assert tau.size == 1
    np.testing.assert_allclose(tau.support[0], P0, atol=1e-12)


def test_fixed_point_tied_actions_at_huge_cost(D1):
    # a1 and a3 tie at the prior: any remaining information is negligible
    tau = solve_entropy_fixed_point(D1, 1e6)
    assert np.max(np.abs(tau.support - P0)) < 1e-5


def test_fixed_point_base_two_learns_less(D1):
    natural = entropy_fixed_point(D1, 2.5).experiment
    base2 = entropy_fixed_point(D1, 2.5, log_base=2.0).experiment
    # cost in bits is larger, so the agent learns less
    assert ShannonCost(P0)(base2.support).max() < ShannonCost(P0)(natural.support).max()


def test_fixed_point_iteration_cap(D1):
    with pytest.raises(NoConvergence):
        entropy_fixed_point(D1, 2.5, SolverConfig(max_iterations=3))


def test_fixed_point_rejects_nonpositive_multiplier(D1):
    with pytest.raises(ValueError):
        entropy_fixed_point(D1, 0.0)


def test_concavify_matches_fixed_point(D1):
    c = ShannonCost(P0)
    phi = relaxed_objective(D1, c, 2.0)
    lp = concavify(phi, P0, resolution=128)
    ba = solve_entropy_fixed_point(D1, 2.0)
    perm = match_rows(lp.experiment.support, ba.support)
    assert np.max(np.abs(lp.experiment.support[perm] - ba.support)) <= 1e-3
    assert lp.value == pytest.approx(ba.expectation(phi), abs=1e-4)
    assert_matches_published(lp.experiment, PUB_S2, PUB_W2)


def test_concavify_certificate(D1):
    phi = relaxed_objective(D1, ShannonCost(P0), 2.5)
    res = concavify(phi, P0, resolution=64)
    assert np.max(res.objective - res.supporting(res.candidates)) <= 1e-7
    np.testing.assert_allclose(res.supporting(res.experiment.support), phi(res.experiment.support), atol=1e-7)
    assert res.supporting(P0) == pytest.approx(res.value, abs=1e-9)


def test_concavify_affine_objective_gives_prior():
    a = np.array([1.0, -2.0, 0.5])
    res = concavify(lambda P: np.atleast_2d(P) @ a, P0, resolution=16)
    assert res.experiment.size == 1
    np.testing.assert_allclose(res.experiment.support[0], P0)


def test_concavify_strictly_concave_gives_prior():
    prior = np.array([0.21, 0.33, 0.46])
    res = concavify(lambda P: -np.sum(np.atleast_2d(P) ** 2, axis=1), prior, resolution=32)
    assert res.experiment.size == 1
    np.testing.assert_allclose(res.experiment.support[0], prior)
    assert res.value == pytest.approx(-np.sum(prior**2), abs=1e-12)
    # brute force on the grid: the tangent plane at the prior dominates every candidate
    G = simplex_grid(3, 32)
    tangent = -np.sum(prior**2) - 2 * (G - prior) @ prior
    assert np.all(-np.sum(G**2, axis=1) <= tangent + 1e-12)


def test_concavify_convex_two_state_goes_to_vertices():
    res = concavify(lambda P: np.sum(np.atleast_2d(P) ** 2, axis=1), [0.3, 0.7], resolution=9, refine=False)
    np.testing.assert_allclose(res.experiment.support, [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(res.experiment.probs, [0.7, 0.3])


def _subset_oracle(tau, phi):
    """Best objective over Bayes-plausible reweightings of affinely independent support subsets."""
    best = -np.inf
    vals = phi(tau.support)
    mean = tau.mean()
    d = tau.dim
    for r in range(1, d + 1):
        for idx in combinations(range(tau.size), r):
            S = tau.support[list(idx)]
            if r == 1:
                if np.allclose(S[0], mean):
                    best = max(best, vals[idx[0]])
                continue
            # least squares weights; keep only exact non-negative representations
            M = np.vstack([S.T, np.ones(r)])
            w, *_ = np.linalg.lstsq(M, np.concatenate([mean, [1.0]]), rcond=None)
            if np.allclose(M @ w, np.concatenate([mean, [1.0]]), atol=1e-12) and np.all(w >= -1e-12):
                best = max(best, float(w @ vals[list(idx)]))
    return best


def test_reduce_support_keeps_independent_support():
    tau = Experiment(PUB_S1, barycentric_coords(PUB_S1, P0))
    assert reduce_support(tau, lambda P: np.zeros(len(np.atleast_2d(P)))) is tau


def test_reduce_support_linear_objective():
    S = np.array([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6], [0.4, 0.4, 0.2]])
    tau = Experiment(S, [0.25, 0.25, 0.25, 0.25])
    a = np.array([1.0, 0.3, -0.7])
    phi = lambda P: np.atleast_2d(P) @ a  # noqa: E731
    out = reduce_support(tau, phi)
    assert out.size <= 3 and out.non_redundant
    np.testing.assert_allclose(out.mean(), tau.mean(), atol=1e-12)
    assert out.expectation(phi) == pytest.approx(tau.expectation(phi), abs=1e-12)
    assert out.expectation(phi) == pytest.approx(_subset_oracle(tau, phi), abs=1e-12)


def test_reduce_support_drops_prior_for_convex_objective():
    S = np.vstack([np.eye(3), P0])
    tau = Experiment(S, [0.25, 0.25, 0.25, 0.25])
    phi = lambda P: np.sum(np.atleast_2d(P) ** 2, axis=1)  # noqa: E731
    out = reduce_support(tau, phi)
    assert out.size == 3
    assert all(not np.allclose(s, P0) for s in out.support)
    np.testing.assert_allclose(np.sort(out.probs), np.full(3, 1 / 3), atol=1e-12)
    assert out.expectation(phi) == pytest.approx(_subset_oracle(tau, phi))
    assert out.expectation(phi) >= tau.expectation(phi)


def test_solve_choice_function_first_example(ex1, X1):
    assert X1.meta["engine"] == "entropy-fixed-point"
    assert_matches_published(X1[0], PUB_S1, PUB_W1)
    assert_matches_published(X1[1], PUB_S2, PUB_W2)
    costs = X1.costs(ex1.cost)
    assert costs[0] <= costs[1]


def test_cross_engine_objective(ex1, X1):
    X_lp = solve_choice_function(ex1, SolverConfig(engine=CONCAVIFY_LP))
    for g, a, b in zip(X1.meta["virtual_types"], X1, X_lp):
        va = objective_value(ex1.decision, ex1.cost, g, a)
        vb = objective_value(ex1.decision, ex1.cost, g, b)
        assert abs(va - vb) <= 1e-4 * (1 + abs(va))


def test_single_type_expensive_information():
    D = DecisionProblem(("w1", "w2"), ("a1", "a2"), np.array([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])
    scen = RandomScenario(D, TypeSpace(np.array([1e7]), np.array([1.0])), QuadraticCost([0.5, 0.5]))
    X = solve_choice_function(scen)
    assert X[0].size == 1
    np.testing.assert_allclose(X[0].support[0], [0.5, 0.5])


def test_three_types_are_c_monotone_and_match_grid_concavification(ex1):
    D = ex1.decision
    types = TypeSpace(np.array([3.0, 2.0, 1.0]), np.full(3, 1 / 3))
    scen = RandomScenario(D, types, ex1.cost)
    X = solve_choice_function(scen)
    costs = X.costs(ex1.cost)
    assert np.all(np.diff(costs) >= -1e-7)
    assert X.meta["virtual_types"] == pytest.approx([5.0, 3.0, 1.0])
    for g, tau in zip([5.0, 3.0, 1.0], X):
        phi = relaxed_objective(D, ex1.cost, g)
        grid = concavify(phi, D.prior, resolution=64)
        assert tau.expectation(phi) >= grid.value - 1e-9


def test_engine_requires_matching_cost(ex1):
    scen = RandomScenario(ex1.decision, ex1.types, QuadraticCost(P0), SolverConfig(engine="entropy-fixed-point"))
    with pytest.raises(InvalidScenario):
        solve_choice_function(scen)


def test_solver_config_validation():
    with pytest.raises(InvalidScenario):
        SolverConfig(engine="bogus")
    with pytest.raises(InvalidScenario):
        SolverConfig(resolution=2)
    assert SolverConfig().engine_for(QuadraticCost(P0)) == CONCAVIFY_LP


def test_value_at_vectorized(D1):
    G = simplex_grid(3, 8)
    np.testing.assert_allclose(value_at(D1, G), np.max(G @ D1.utility.T, axis=1))
