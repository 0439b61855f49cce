"""Run reports: everything needed to re-check or re-audit a solved scenario."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .contracts import ResultsContract, ScreeningResultsContract, payments_T_star
from .errors import InvalidScenario, NotCMonotone
from .geometry import AffineFunctional
from .model import ChoiceFunction, virtual_types
from .monotonicity import MonotonicityReport, monotonicity_report
from .scenario import Scenario, choice_from_dict, choice_to_dict, read_json, scenario_from_dict
from .solver import SolverConfig, solve_choice_function

REPORT_KIND = "run-report"


@dataclass(frozen=True)
class RunReport:
    scenario: Scenario
    choice: ChoiceFunction
    payments: np.ndarray | None
    monotonicity: MonotonicityReport
    engine: str
    config: SolverConfig
    timings: dict[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        vt = virtual_types(self.scenario.types)
        return {
            "schema_version": 1,
            "kind": REPORT_KIND,
            "scenario": self.scenario.to_dict(),
            "engine": self.engine,
            "config": self.config.to_dict(),
            "virtual_types": vt.values.tolist(),
            "virtual_types_increasing": vt.strictly_increasing,
            "choice": choice_to_dict(self.choice),
            "costs": self.choice.costs(self.scenario.cost).tolist(),
            "payments": None if self.payments is None else self.payments.tolist(),
            "monotonicity": self.monotonicity.to_dict(),
            "timings": self.timings,
            "notes": list(self.notes),
        }


def run_solve(scenario: Scenario, cfg: SolverConfig | None = None) -> RunReport:
    """Solve (or take the exogenous choice function), price it with ``T*`` and classify it."""
    cfg = cfg or scenario.solver
    timings: dict[str, float] = {}
    notes: list[str] = []
    t0 = time.perf_counter()
    if scenario.choice is not None:
        X = scenario.choice
        engine = "exogenous"
    else:
        X = solve_choice_function(scenario, cfg)
        engine = X.meta["engine"]
    timings["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        T = payments_T_star(X, scenario.types, scenario.cost)
    except NotCMonotone as exc:
        T = None
        notes.append(f"no incentive-compatible payments: {exc}")
    timings["payments"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mono = monotonicity_report(X, scenario.types, scenario.cost, symmetric_tol=scenario.tol("symmetric", 1e-9))
    timings["monotonicity"] = time.perf_counter() - t0
    return RunReport(scenario, X, T, mono, engine, cfg, timings, tuple(notes))


def load_inputs(path: str | Path) -> tuple[Scenario, ChoiceFunction | None, np.ndarray | None]:
    """Read a scenario or a run report; reports also yield the stored choice function and payments."""
    data = read_json(path)
    if isinstance(data, dict) and data.get("kind") == REPORT_KIND:
        scenario = scenario_from_dict(data["scenario"])
        X = choice_from_dict(data["choice"])
        T = None if data.get("payments") is None else np.asarray(data["payments"], dtype=float)
        return scenario, X, T
    scenario = scenario_from_dict(data)
    return scenario, scenario.choice, None


def contract_to_dict(contract: ResultsContract | ScreeningResultsContract) -> dict[str, Any]:
    return {"schema_version": 1, **contract.to_dict()}


def contract_from_dict(data: Any) -> ResultsContract | ScreeningResultsContract:
    if not isinstance(data, dict) or "kind" not in data:
        raise InvalidScenario("contract file must be a JSON object with a 'kind'")
    try:
        if data["kind"] == "results":
            return ResultsContract.from_dict(data)
        if data["kind"] == "forcing":
            return ScreeningResultsContract(
                np.asarray(data["thetas"], dtype=float),
                tuple(np.asarray(S, dtype=float) for S in data["supports"]),
                np.asarray(data["payments"], dtype=float),
                float(data["floor"]),
                tuple(AffineFunctional(np.asarray(h, dtype=float)) for h in data["hyperplanes"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad contract file: {exc}") from exc
    raise InvalidScenario(f"unknown contract kind {data['kind']!r}")


def load_contract(path: str | Path) -> ResultsContract | ScreeningResultsContract:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScenario(f"cannot read contract {path}: {exc}") from exc
    return contract_from_dict(data)
