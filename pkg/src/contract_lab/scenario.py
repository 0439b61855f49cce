"""Scenario files (JSON, schema version 1) and the bundled examples.

A scenario fixes the state space and prior, the type distribution, the
posterior-separable cost and, optionally, a decision problem to solve or an
exogenous choice function that bypasses the solver.  Numbers may be written
as JSON numbers or as strings such as ``"9/4"``; ``"e"`` is accepted as a
log base.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidScenario
from .model import (
    ChoiceFunction,
    CostModel,
    DecisionProblem,
    Experiment,
    QuadraticCost,
    ShannonCost,
    TabulatedCost,
    TypeSpace,
    check_cost_model,
)
from .solver import SolverConfig

SCHEMA_VERSION = 1
BUNDLED = ("example1", "example2")


def _number(x: Any) -> float:
    if isinstance(x, bool):
        raise InvalidScenario(f"expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        s = x.strip()
        if s == "e":
            return math.e
        try:
            return float(Fraction(s))
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidScenario(f"cannot read {x!r} as a number") from exc
    raise InvalidScenario(f"expected a number, got {x!r}")


def _vector(xs: Any, name: str) -> NDArray[np.float64]:
    if not isinstance(xs, list) or not xs:
        raise InvalidScenario(f"{name} must be a non-empty list")
    return np.array([_number(x) for x in xs])


def _matrix(rows: Any, name: str) -> NDArray[np.float64]:
    if not isinstance(rows, list) or not rows:
        raise InvalidScenario(f"{name} must be a non-empty list of rows")
    out = [_vector(r, name) for r in rows]
    if len({r.size for r in out}) != 1:
        raise InvalidScenario(f"{name} rows have different lengths")
    return np.vstack(out)


def _require(data: dict[str, Any], key: str, where: str = "scenario") -> Any:
    if key not in data:
        raise InvalidScenario(f"{where} is missing {key!r}")
    return data[key]


@dataclass(frozen=True)
class Scenario:
    name: str
    states: tuple[str, ...]
    prior: NDArray[np.float64]
    types: TypeSpace
    cost: CostModel
    decision: DecisionProblem | None = None
    choice: ChoiceFunction | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    tolerances: dict[str, float] = field(default_factory=dict)
    expected: dict[str, Any] = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "states": list(self.states),
            "prior": self.prior.tolist(),
            "types": {"thetas": self.types.thetas.tolist(), "pmf": self.types.pmf.tolist()},
            "cost": self.cost.to_dict(),
            "solver": self.solver.to_dict(),
            "tolerances": dict(self.tolerances),
        }
        if self.decision is not None:
            data["actions"] = list(self.decision.actions)
            data["utility"] = self.decision.utility.tolist()
        if self.choice is not None:
            data["choice"] = choice_to_dict(self.choice)
        if self.expected:
            data["expected"] = self.expected
        return data


def choice_to_dict(X: ChoiceFunction) -> dict[str, Any]:
    return {"experiments": [{"support": e.support.tolist(), "probs": e.probs.tolist()} for e in X]}


def choice_from_dict(data: Any) -> ChoiceFunction:
    try:
        exps = _require(data, "experiments", "choice")
        normalize = bool(data.get("normalize", False))
        out = []
        for e in exps:
            S = _matrix(e["support"], "support")
            w = _vector(e["probs"], "probs")
            if normalize:
                # published posteriors are rounded; rescale rows that are off by rounding only
                if np.any(np.abs(S.sum(axis=1) - 1.0) > 1e-3) or abs(w.sum() - 1.0) > 1e-3:
                    raise InvalidScenario("rows to normalize must already sum to 1 within 1e-3")
                S = S / S.sum(axis=1, keepdims=True)
                w = w / w.sum()
            out.append(Experiment(S, w))
        return ChoiceFunction(tuple(out))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad choice function: {exc}") from exc


def _cost_from(data: Any, prior: NDArray, dim: int) -> CostModel:
    if not isinstance(data, dict):
        raise InvalidScenario("cost must be an object")
    kind = _require(data, "kind", "cost")
    if kind in ("shannon", "shannon-entropy"):
        return ShannonCost(prior, _number(data.get("log_base", "e")))
    if kind == "quadratic":
        center = _vector(data["center"], "cost.center") if "center" in data else prior
        return QuadraticCost(center)
    if kind == "tabulated":
        return TabulatedCost(dim, int(_require(data, "resolution", "cost")), _vector(_require(data, "values", "cost"), "cost.values"))
    raise InvalidScenario(f"unknown cost kind {kind!r}")


def _solver_from(data: Any) -> SolverConfig:
    if data is None:
        return SolverConfig()
    if not isinstance(data, dict):
        raise InvalidScenario("solver must be an object")
    allowed = {"engine", "resolution", "refine", "fixed_point_tol", "max_iterations", "prune_actions"}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidScenario(f"unknown solver keys {sorted(unknown)}")
    kwargs = dict(data)
    if kwargs.get("fixed_point_tol") is not None:
        kwargs["fixed_point_tol"] = _number(kwargs["fixed_point_tol"])
    return SolverConfig(**kwargs)


def scenario_from_dict(data: Any) -> Scenario:
    """Build and validate a scenario; every failure surfaces as :class:`InvalidScenario`."""
    if not isinstance(data, dict):
        raise InvalidScenario("scenario must be a JSON object")
    version = _require(data, "schema_version")
    if version != SCHEMA_VERSION:
        raise InvalidScenario(f"unsupported schema_version {version!r}")
    try:
        states = tuple(str(s) for s in _require(data, "states"))
        prior = _vector(_require(data, "prior"), "prior")
        if prior.size != len(states):
            raise InvalidScenario("prior needs one entry per state")
        if np.any(prior <= 0) or abs(prior.sum() - 1.0) > 1e-9:
            raise InvalidScenario("prior must be a full-support probability vector")
        prior = prior / prior.sum()
        tdata = _require(data, "types")
        types = TypeSpace(_vector(_require(tdata, "thetas", "types"), "thetas"), _vector(_require(tdata, "pmf", "types"), "pmf"))
        cost = _cost_from(_require(data, "cost"), prior, len(states))
        check_cost_model(cost, prior)
        decision = None
        if "utility" in data:
            actions = tuple(str(a) for a in _require(data, "actions"))
            decision = DecisionProblem(states, actions, _matrix(data["utility"], "utility"), prior)
        choice = choice_from_dict(data["choice"]) if "choice" in data else None
        tolerances = {str(k): _number(v) for k, v in (data.get("tolerances") or {}).items()}
        if choice is not None:
            if len(choice) != len(types) or choice.dim != len(states):
                raise InvalidScenario("choice function does not match the types or the state space")
            tol = tolerances.get("plausibility", 1e-6)
            for k, rep in enumerate(choice.validate(prior, tol)):
                if not rep.ok:
                    raise InvalidScenario(f"experiment {k + 1}: {'; '.join(rep.violations)}")
        if decision is None and choice is None:
            raise InvalidScenario("scenario needs a decision problem or an exogenous choice function")
        return Scenario(
            name=str(data.get("name", "scenario")),
            states=states,
            prior=prior,
            types=types,
            cost=cost,
            decision=decision,
            choice=choice,
            solver=_solver_from(data.get("solver")),
            tolerances=tolerances,
            expected=dict(data.get("expected") or {}),
        )
    except InvalidScenario:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(str(exc)) from exc


def bundled_path(name: str) -> Path:
    ref = resources.files("contract_lab") / "data" / f"{name}.json"
    return Path(str(ref))


def resolve_path(name_or_path: str | Path) -> Path:
    """Bundled example names (``example1``, ``example1.json``) resolve to package data."""
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in BUNDLED:
        return bundled_path(stem)
    raise InvalidScenario(f"no such file: {name_or_path}")


def read_json(path: str | Path) -> Any:
    p = resolve_path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"{p}: invalid JSON ({exc})") from exc


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(read_json(path))


def load_example(name: str) -> Scenario:
    if name not in BUNDLED:
        raise InvalidScenario(f"unknown bundled example {name!r}")
    return load_scenario(bundled_path(name))


def dump_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=2) + "\n", encoding="utf-8")
