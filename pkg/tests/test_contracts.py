from __future__ import annotations

import numpy as np
import pytest

from conftest import PUB_S1, PUB_S2, PUB_W1, PUB_W2, experiment
from contract_lab.contracts import (
    ResultsContract,
    build_forcing_contract,
    build_results_contract,
    expected_payment,
    ic_violations,
    methods_contract,
    payments_T_star,
    t_star_payments,
)
from contract_lab.errors import (
    NotCMonotone,
    NotFullDimension,
    NotIncentiveCompatible,
    NotStronglyCMonotone,
    OverlappingSupports,
    RedundantSupport,
)
from contract_lab.generators import random_choice_function, random_ic_schedule, random_types, rng_for
from contract_lab.model import ChoiceFunction, Experiment, QuadraticCost, ShannonCost, TypeSpace
from contract_lab.verify import audit_contract

P0 = np.full(3, 1 / 3)

# T* on the published posteriors under the natural-log entropy cost, computed with
# scipy.stats.entropy as c(p) = ln 3 - H(p) and the rent recursion by hand.
PUB_T_STAR = np.array([0.283266155726, 0.463856444653])


def test_t_star_on_published_posteriors():
    c = ShannonCost(P0)
    X = ChoiceFunction((experiment(PUB_S1, PUB_W1), experiment(PUB_S2, PUB_W2)))
    T = t_star_payments([2.25, 2.0], X.costs(c))
    np.testing.assert_allclose(T, PUB_T_STAR, atol=1e-11)


def test_t_star_on_solved_example_close_to_published(ex1, T1):
    np.testing.assert_allclose(T1, PUB_T_STAR, atol=2e-3)


def test_t_star_single_type():
    np.testing.assert_allclose(t_star_payments([3.0], [0.4]), [1.2])
    X = ChoiceFunction((experiment(PUB_S1, PUB_W1),))
    Ts = TypeSpace(np.array([3.0]), np.array([1.0]))
    c = QuadraticCost(P0)
    mc = methods_contract(X, payments_T_star(X, Ts, c), Ts, c)
    assert mc.payoff(0, 0) == pytest.approx(0.0, abs=1e-15)


def test_t_star_equal_costs_three_types():
    C = 0.2
    T = t_star_payments([3.0, 2.0, 1.0], [C, C, C])
    # by hand: T_k = theta_k C + sum_{i<k} (theta_i - theta_{i+1}) C = theta_1 C
    np.testing.assert_allclose(T, [0.6, 0.6, 0.6])
    rents = T - np.array([3.0, 2.0, 1.0]) * C
    np.testing.assert_allclose(rents, [0.0, 0.2, 0.4])
    assert np.all(np.diff(rents) > 0)


def test_t_star_increasing_costs_three_types():
    T = t_star_payments([3.0, 2.0, 1.0], [0.1, 0.2, 0.5])
    np.testing.assert_allclose(T, [0.3, 0.4 + 0.1, 0.5 + 0.1 + 0.2])


def test_t_star_is_ic_and_tight(ex1, X1, T1):
    mc = methods_contract(X1, T1, ex1.types, ex1.cost)
    assert mc.incentive_compatible
    # IR binds for the least efficient type and the downward adjacent IC binds
    assert mc.payoff(0, 0) == pytest.approx(0.0, abs=1e-15)
    assert mc.payoff(1, 1) == pytest.approx(mc.payoff(1, 0), abs=1e-15)
    for k in range(2):
        lowered = T1.copy()
        lowered[k] -= 1e-6
        assert ic_violations(lowered, ex1.types.thetas, mc.costs)


def test_payments_refuse_non_c_monotone(ex2):
    rev = ChoiceFunction(tuple(reversed(ex2.choice.experiments)))
    with pytest.raises(NotCMonotone) as info:
        payments_T_star(rev, ex2.types, ex2.cost)
    assert info.value.witness["pair"] == (0, 1)


def test_minimality_against_random_schedules():
    for i in range(30):
        X, prior = random_choice_function(i, 3, 3)
        c = ShannonCost(prior)
        costs = X.costs(c)
        order = np.argsort(costs)
        X = ChoiceFunction(tuple(X[k] for k in order))
        Ts = random_types(rng_for(i, 9), 3)
        T = payments_T_star(X, Ts, c)
        alt = random_ic_schedule(Ts.thetas, X.costs(c), rng_for(i, 10))
        assert alt is not None
        assert np.all(T <= alt + 1e-9)


# ---- forcing contract ------------------------------------------------------


def test_forcing_single_type_null_experiment():
    X = ChoiceFunction((Experiment.point_mass(P0),))
    f = build_forcing_contract(X, [0.0], TypeSpace(np.array([2.0]), np.array([1.0])), QuadraticCost(P0))
    assert f.payment(0, P0) == 0.0
    # H interpolates c(p0) = 0 at one point; the minimum-norm choice is zero, so is the floor
    assert f.floor == pytest.approx(0.0, abs=1e-15)


def test_forcing_first_example(ex1, X1, T1, f1):
    for k, e in enumerate(X1):
        assert f1.expected_payment(k, e) == pytest.approx(T1[k], abs=1e-15)
        # independent floor: T - theta H at each vertex with H from a direct solve
        a = np.linalg.solve(e.support, ex1.cost(e.support))
        assert f1.floor <= np.min(T1[k] - ex1.types.thetas[k] * a) + 1e-12
    assert f1.payment(0, X1[1].support[0]) == f1.floor


def test_forcing_identical_experiments_need_equal_payments():
    e = experiment(PUB_S1, PUB_W1 / PUB_W1.sum())
    X = ChoiceFunction((e, e))
    c = ShannonCost(P0)
    Ts = TypeSpace(np.array([2.25, 2.0]), np.array([0.5, 0.5]))
    C = c(PUB_S1) @ (PUB_W1 / PUB_W1.sum())
    f = build_forcing_contract(X, [2.25 * C, 2.25 * C], Ts, c)
    assert f.expected_payment(0, e) == f.expected_payment(1, e)
    with pytest.raises(NotIncentiveCompatible):
        build_forcing_contract(X, [2.25 * C, 2.25 * C + 0.01], Ts, c)


def test_forcing_rejects_redundant_support():
    S = np.array([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6], [0.4, 0.4, 0.2]])
    X = ChoiceFunction((Experiment(S, [0.25] * 4),))
    with pytest.raises(RedundantSupport):
        build_forcing_contract(X, [1.0], TypeSpace(np.array([1.0]), np.array([1.0])), QuadraticCost(S.mean(axis=0)))


# ---- results-based contract ------------------------------------------------


def test_results_contract_first_example_displayed_rule(ex1, X1, T1, t1):
    th1, th2 = ex1.types.thetas
    c = ex1.cost
    a = np.linalg.solve(X1[0].support, c(X1[0].support))
    np.testing.assert_allclose(t1(X1[0].support), th1 * c(X1[0].support), atol=1e-14)
    np.testing.assert_allclose(t1(X1[1].support), th2 * c(X1[1].support) + (th1 - th2) * (X1[1].support @ a), atol=1e-12)
    assert t1.default < np.min(t1.amounts)
    for k, e in enumerate(X1):
        assert abs(expected_payment(t1, e) - T1[k]) <= 1e-9


def test_results_contract_single_type():
    e = experiment(PUB_S1, np.linalg.lstsq(np.vstack([PUB_S1.T, np.ones(3)]), np.r_[P0, 1], rcond=None)[0])
    X = ChoiceFunction((e,))
    c = ShannonCost(P0)
    Ts = TypeSpace(np.array([1.5]), np.array([1.0]))
    T = payments_T_star(X, Ts, c)
    t = build_results_contract(X, T, Ts, c)
    np.testing.assert_allclose(t(PUB_S1), 1.5 * c(PUB_S1))
    assert expected_payment(t, e) == pytest.approx(1.5 * (e.probs @ c(PUB_S1)), abs=1e-12)
    # the floor sits just below min theta c = 0
    assert -1e-5 < t.default < 0


def test_results_floor_safety(ex1, X1, T1, t1):
    safer = build_results_contract(X1, T1, ex1.types, ex1.cost, 10 * t1.meta["floor_margin"])
    assert safer.default < t1.default
    for e in X1:
        assert expected_payment(safer, e) == expected_payment(t1, e)
    assert audit_contract(X1, safer, ex1.types, ex1.cost, ex1.prior, T1).passed


def test_results_refuses_second_example(ex2):
    X = ex2.choice
    T = payments_T_star(X, ex2.types, ex2.cost)
    with pytest.raises(NotStronglyCMonotone) as info:
        build_results_contract(X, T, ex2.types, ex2.cost)
    q2pp = X[1].support[np.argmax(X[1].support[:, 2])]
    np.testing.assert_allclose(info.value.witness["belief"], q2pp)


def test_results_refuses_partial_support():
    X = ChoiceFunction((Experiment.point_mass(P0), experiment(PUB_S1, PUB_W1)))
    with pytest.raises(NotFullDimension):
        build_results_contract(X, [0.0, 0.1], TypeSpace(np.array([2.0, 1.0]), np.array([0.5, 0.5])), QuadraticCost(P0))


def test_results_refuses_overlap():
    w = np.linalg.lstsq(np.vstack([PUB_S1.T, np.ones(3)]), np.r_[P0, 1], rcond=None)[0]
    S2 = PUB_S1.copy()
    S2[1:] = PUB_S2[1:]
    w2 = np.linalg.lstsq(np.vstack([S2.T, np.ones(3)]), np.r_[P0, 1], rcond=None)[0]
    X = ChoiceFunction((experiment(PUB_S1, w), experiment(S2, w2)))
    with pytest.raises(OverlappingSupports):
        build_results_contract(X, [0.0, 0.1], TypeSpace(np.array([2.0, 1.0]), np.array([0.5, 0.5])), ShannonCost(P0))


def test_expected_payment_examples(X1, t1):
    off = np.array([0.5, 0.25, 0.25])
    assert expected_payment(t1, Experiment.point_mass(off)) == t1.default
    p, q = X1[0].support[0], X1[1].support[1]
    mix = Experiment(np.vstack([p, q, off]), [0.2, 0.5, 0.3])
    assert expected_payment(t1, mix) == pytest.approx(0.2 * t1(p) + 0.5 * t1(q) + 0.3 * t1.default)


def test_results_contract_round_trip(t1):
    back = ResultsContract.from_dict(t1.to_dict())
    np.testing.assert_array_equal(back.beliefs, t1.beliefs)
    np.testing.assert_array_equal(back.amounts, t1.amounts)
    assert back.default == t1.default and back.owners == t1.owners


def test_results_contract_rejects_duplicate_beliefs():
    with pytest.raises(OverlappingSupports):
        ResultsContract(np.array([P0, P0]), [1.0, 2.0], 0.0)
