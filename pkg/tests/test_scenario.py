from __future__ import annotations

import copy
import json
import math

import numpy as np
import pytest

from contract_lab.errors import InvalidScenario
from contract_lab.model import QuadraticCost, ShannonCost, TabulatedCost
from contract_lab.scenario import (
    dump_scenario,
    load_example,
    load_scenario,
    resolve_path,
    scenario_from_dict,
)

BASE = {
    "schema_version": 1,
    "states": ["w1", "w2"],
    "actions": ["a1", "a2"],
    "utility": [[1, 0], [0, 1]],
    "prior": ["1/2", "1/2"],
    "types": {"thetas": ["9/4", 2], "pmf": [0.5, 0.5]},
    "cost": {"kind": "shannon"},
}


def with_(**changes):
    d = copy.deepcopy(BASE)
    d.update(changes)
    return d


def test_fractions_and_natural_base():
    s = scenario_from_dict(with_(cost={"kind": "shannon", "log_base": "e"}))
    np.testing.assert_array_equal(s.types.thetas, [2.25, 2.0])
    assert isinstance(s.cost, ShannonCost)
    p = np.array([0.9, 0.1])
    kl = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
    assert s.cost(p) == pytest.approx(kl, rel=1e-12)
    s2 = scenario_from_dict(with_(cost={"kind": "shannon", "log_base": 2}))
    assert s2.cost(p) == pytest.approx(kl / math.log(2), rel=1e-12)


@pytest.mark.parametrize(
    "changes",
    [
        {"schema_version": 2},
        {"prior": [0.5, 0.6]},
        {"prior": [1.0, 0.0]},
        {"prior": [1.0]},
        {"prior": ["half", "half"]},
        {"prior": [True, False]},
        {"types": {"thetas": [1, 2], "pmf": [0.5, 0.5]}},
        {"types": {"thetas": [2, 1]}},
        {"cost": {"kind": "cubic"}},
        {"cost": "shannon"},
        {"utility": [[1, 0], [0]]},
        {"solver": {"engine": "entropy-fixed-point", "speed": 3}},
        {"choice": {"experiments": [{"support": [[0.5, 0.5]], "probs": [1.0]}]}},
    ],
)
def test_invalid_scenarios(changes):
    with pytest.raises(InvalidScenario):
        scenario_from_dict(with_(**changes))


def test_needs_decision_or_choice():
    d = with_()
    del d["utility"], d["actions"]
    with pytest.raises(InvalidScenario):
        scenario_from_dict(d)


def test_choice_must_be_plausible():
    d = with_(choice={"experiments": [{"support": [[0.2, 0.8], [0.9, 0.1]], "probs": [0.5, 0.5]}] * 2})
    with pytest.raises(InvalidScenario, match="experiment 1"):
        scenario_from_dict(d)


def test_normalize_rescales_rounded_rows():
    exp = {"support": [[0.2001, 0.8], [0.8, 0.2]], "probs": [0.5, 0.5001]}
    s = scenario_from_dict(with_(choice={"normalize": True, "experiments": [exp, exp]}, tolerances={"plausibility": 1e-3}))
    np.testing.assert_allclose(s.choice[0].support.sum(axis=1), 1.0, atol=1e-15)
    assert s.choice[0].probs.sum() == pytest.approx(1.0, abs=1e-15)
    far = {"support": [[0.3, 0.8], [0.8, 0.2]], "probs": [0.5, 0.5]}
    with pytest.raises(InvalidScenario):
        scenario_from_dict(with_(choice={"normalize": True, "experiments": [far, far]}))


def test_cost_kinds():
    q = scenario_from_dict(with_(cost={"kind": "quadratic", "center": [0.5, 0.5]}))
    assert isinstance(q.cost, QuadraticCost)
    vals = [((i / 4) - 0.5) ** 2 for i in range(5)]
    # piecewise-affine interpolation is flat inside a cell, which the convexity probe reports
    with pytest.warns(UserWarning, match="strictly convex"):
        t = scenario_from_dict(with_(cost={"kind": "tabulated", "resolution": 4, "values": vals}))
    assert isinstance(t.cost, TabulatedCost)


def test_round_trip(tmp_path):
    for name in ("example1", "example2"):
        s = load_example(name)
        path = tmp_path / f"{name}.json"
        dump_scenario(s, path)
        back = load_scenario(path)
        assert back.to_dict() == s.to_dict()
        json.loads(path.read_text())


def test_resolve_path(tmp_path):
    assert resolve_path("example1").name == "example1.json"
    assert resolve_path("somewhere/example2.json").name == "example2.json"
    with pytest.raises(InvalidScenario):
        resolve_path(tmp_path / "nope.json")
    with pytest.raises(InvalidScenario):
        load_example("example3")


def test_bundled_examples_content():
    s1, s2 = load_example("example1"), load_example("example2")
    np.testing.assert_array_equal(s1.types.thetas, [2.25, 2.0])
    assert s1.decision is not None and s1.choice is None
    assert s2.decision is None and len(s2.choice) == 2
    assert s2.tol("plausibility", 1e-6) == 4e-3
