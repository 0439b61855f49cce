"""Command-line interface: ``contract-lab {solve,check,build,audit,export}``.

Exit codes: 0 pass, 1 audit or monotonicity failure (including a refused
contract build), 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .contracts import build_forcing_contract, build_results_contract, payments_T_star
from .errors import (
    ContractLabError,
    DimensionMismatch,
    InvalidScenario,
    NotFullDimension,
    NotIncentiveCompatible,
    NumericalFailure,
    OverlappingSupports,
    PaymentMismatch,
    RedundantSupport,
    WitnessedError,
)
from .geometry import simplex_grid
from .monotonicity import STRONG_C, interpolants, monotonicity_report
from .report import contract_to_dict, load_contract, load_inputs, run_solve
from .scenario import Scenario
from .solver import ENGINES, SolverConfig
from .verify import audit_contract

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

REFUSALS = (WitnessedError, RedundantSupport, NotFullDimension, OverlappingSupports, NotIncentiveCompatible, PaymentMismatch)



def _json_default(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _emit(payload: Any, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _solver_config(scenario: Scenario, args: argparse.Namespace) -> SolverConfig:
    cfg = scenario.solver
    kwargs = cfg.to_dict()
    if getattr(args, "engine", None):
        kwargs["engine"] = args.engine
    if getattr(args, "resolution", None):
        kwargs["resolution"] = args.resolution
    return SolverConfig(**kwargs)


def _choice_and_payments(path: str) -> tuple[Scenario, Any, Any]:
    """Scenario, choice function and ``T*`` from a report, scenario with exogenous choice, or solvable scenario."""
    scenario, X, T = load_inputs(path)
    if X is None:
        run = run_solve(scenario)
        X, T = run.choice, run.payments
    if T is None:
        T = payments_T_star(X, scenario.types, scenario.cost)
    return scenario, X, T


def cmd_solve(args: argparse.Namespace) -> int:
    scenario, _, _ = load_inputs(args.scenario)
    report = run_solve(scenario, _solver_config(scenario, args))
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    scenario, X, _ = load_inputs(args.path)
    if X is None:
        X = run_solve(scenario).choice
    rep = monotonicity_report(X, scenario.types, scenario.cost, symmetric_tol=scenario.tol("symmetric", 1e-9))
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed(STRONG_C) else EXIT_FAIL


def cmd_build(args: argparse.Namespace) -> int:
    try:
        scenario, X, T = _choice_and_payments(args.path)
        if args.contract == "forcing":
            contract = build_forcing_contract(X, T, scenario.types, scenario.cost)
        else:
            contract = build_results_contract(X, T, scenario.types, scenario.cost, args.floor_margin)
    except REFUSALS as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, WitnessedError):
            payload["witness"] = exc.witness
        _emit(payload, args.out)
        return EXIT_FAIL
    _emit(contract_to_dict(contract), args.out)
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    scenario, X, T = _choice_and_payments(args.path)
    contract = load_contract(args.contract)
    rep = audit_contract(X, contract, scenario.types, scenario.cost, scenario.prior, T, resolution=args.resolution)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_export(args: argparse.Namespace) -> int:
    scenario, X, _ = load_inputs(args.path)
    if X is None:
        X = run_solve(scenario).choice
    c = scenario.cost
    n = scenario.n_states
    header = ["record", "type", "index", *[f"p_{s}" for s in scenario.states], "probability", "cost", "region", "gap"]
    rows: list[list[Any]] = []
    for k, e in enumerate(X):
        for i, (p, w) in enumerate(zip(e.support, e.probs)):
            rows.append(["posterior", k + 1, i + 1, *map(repr, p.tolist()), repr(float(w)), repr(float(c(p))), "", ""])
    if X.full_dimension and len(X) > 1:
        H = interpolants(X, c)
        grid = simplex_grid(n, args.region_resolution)
        cv = np.asarray(c(grid), dtype=float)
        for k in range(len(X) - 1):
            gaps = cv - H[k](grid)
            for i, (p, g) in enumerate(zip(grid, gaps)):
                label = "boundary" if abs(g) <= 1e-9 * (1 + abs(cv[i])) else ("U" if g > 0 else "D")
                rows.append(["region", k + 1, i + 1, *map(repr, p.tolist()), "", repr(float(cv[i])), label, repr(float(g))])
    with open(args.csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contract-lab", description="Information-acquisition contracts workbench.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a scenario and write a run report")
    p.add_argument("scenario", help="scenario JSON, or a bundled name such as example1")
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--resolution", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="classify a choice function against the ordering conditions")
    p.add_argument("path", help="scenario or run report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("build", help="build a forcing or results-based contract")
    p.add_argument("path", help="scenario or run report")
    p.add_argument("--contract", choices=("forcing", "results"), required=True)
    p.add_argument("--floor-margin", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("audit", help="audit a contract file against a scenario or report")
    p.add_argument("path", help="scenario or run report")
    p.add_argument("contract", help="contract JSON written by 'build'")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("export", help="write posteriors and U/D region samples as CSV")
    p.add_argument("path", help="scenario or run report")
    p.add_argument("--csv", required=True)
    p.add_argument("--region-resolution", type=int, default=24)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InvalidScenario, DimensionMismatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ContractLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
