from __future__ import annotations

import numpy as np
import pytest

from contract_lab.contracts import build_forcing_contract, build_results_contract, payments_T_star
from contract_lab.model import Experiment
from contract_lab.scenario import load_example
from contract_lab.solver import solve_choice_function

# Published posteriors and probabilities of the first worked example (rounded to 4 digits).
PUB_S1 = np.array([[0.3626, 0.4899, 0.1475], [0.0491, 0.7308, 0.2201], [0.3626, 0.1475, 0.4899]])
PUB_W1 = np.array([0.3838, 0.0933, 0.5229])
PUB_S2 = np.array([[0.4141, 0.4790, 0.1069], [0.0340, 0.7898, 0.1762], [0.4141, 0.1069, 0.4790]])
PUB_W2 = np.array([0.2186, 0.2125, 0.5689])


def match_rows(found: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """Permutation ``perm`` with ``found[perm[i]]`` closest to ``expected[i]``."""
    d = np.abs(found[:, None, :] - expected[None, :, :]).max(axis=2)
    perm = d.argmin(axis=0)
    assert len(set(perm.tolist())) == len(perm)
    return perm


@pytest.fixture(scope="session")
def ex1():
    return load_example("example1")


@pytest.fixture(scope="session")
def ex2():
    return load_example("example2")


@pytest.fixture(scope="session")
def X1(ex1):
    return solve_choice_function(ex1)


@pytest.fixture(scope="session")
def T1(ex1, X1):
    return payments_T_star(X1, ex1.types, ex1.cost)


@pytest.fixture(scope="session")
def t1(ex1, X1, T1):
    return build_results_contract(X1, T1, ex1.types, ex1.cost)


@pytest.fixture(scope="session")
def f1(ex1, X1, T1):
    return build_forcing_contract(X1, T1, ex1.types, ex1.cost)


@pytest.fixture
def uniform3():
    return np.full(3, 1.0 / 3.0)


def experiment(S, w) -> Experiment:
    return Experiment(np.asarray(S, dtype=float), np.asarray(w, dtype=float))


@pytest.fixture(scope="session")
def results_audit(ex1, X1, T1, t1):
    from contract_lab.verify import audit_contract

    return audit_contract(X1, t1, ex1.types, ex1.cost, ex1.prior, T1)


@pytest.fixture(scope="session")
def forcing_audit(ex1, X1, T1, f1):
    from contract_lab.verify import audit_contract

    return audit_contract(X1, f1, ex1.types, ex1.cost, ex1.prior, T1)


# ---- acceptance summary -----------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record_acceptance(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    print(ACCEPTANCE[criterion])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
