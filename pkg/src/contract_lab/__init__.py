"""Contracting for information acquisition: solver, contracts and audits."""

from .contracts import (
    MethodsContract,
    ResultsContract,
    ScreeningResultsContract,
    build_forcing_contract,
    build_results_contract,
    expected_payment,
    payments_T_star,
    t_star_payments,
)
from .model import (
    ChoiceFunction,
    DecisionProblem,
    Experiment,
    QuadraticCost,
    ShannonCost,
    TabulatedCost,
    TypeSpace,
    cost_of_experiment,
    validate_experiment,
    virtual_types,
)
from .monotonicity import monotonicity_report
from .scenario import Scenario, load_example, load_scenario
from .solver import SolverConfig, concavify, solve_choice_function
from .verify import audit_contract, best_response, check_secant_condition, construct_deviation

__version__ = "0.1.0"

__all__ = [
    "ChoiceFunction",
    "DecisionProblem",
    "Experiment",
    "MethodsContract",
    "QuadraticCost",
    "ResultsContract",
    "Scenario",
    "ScreeningResultsContract",
    "ShannonCost",
    "SolverConfig",
    "TabulatedCost",
    "TypeSpace",
    "audit_contract",
    "best_response",
    "build_forcing_contract",
    "build_results_contract",
    "check_secant_condition",
    "concavify",
    "construct_deviation",
    "cost_of_experiment",
    "expected_payment",
    "load_example",
    "load_scenario",
    "monotonicity_report",
    "payments_T_star",
    "solve_choice_function",
    "t_star_payments",
    "validate_experiment",
    "virtual_types",
]
