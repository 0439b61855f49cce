"""Incentive-compatibility audits for results-based contracts.

Three independent routes are provided: the secant-hyperplane test on each
type's suggested support, the explicit profitable deviation obtained by
swapping one support point for a violating belief, and a best-response
oracle that concavifies the researcher's payoff over a belief grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .contracts import (
    ResultsContract,
    ScreeningResultsContract,
    expected_payment,
    t_star_payments,
)
from .errors import InvalidGeometry, NotFullDimension
from .geometry import (
    AffineFunctional,
    affine_from_graph,
    as_points,
    barycentric_coords,
    match_belief,
    minimize_on_simplex,
    simplex_grid,
)
from .model import ChoiceFunction, CostModel, Experiment, TypeSpace, cost_of_experiment
from .solver import concavify

SECANT_SLACK = 1e-9
BEST_RESPONSE_TOL = 1e-6
OBEDIENCE_TOL = 1e-8
PAYMENT_TOL = 1e-9
AUDIT_RESOLUTION = 128


def _slack(x: float, base: float = SECANT_SLACK) -> float:
    return base * (1.0 + abs(x))


# --------------------------------------------------------------------------
# Secant hyperplanes
# --------------------------------------------------------------------------


def payoff_function(t: Callable[[Any], Any], theta: float, c: CostModel) -> Callable[[Any], NDArray[np.float64]]:
    """``u(p) = t(p) - theta c(p)``, row-vectorized."""

    def u(P: ArrayLike) -> NDArray[np.float64]:
        Q = as_points(P)
        return np.atleast_1d(np.asarray(t(Q), dtype=float)) - theta * np.asarray(c(Q), dtype=float).reshape(-1)

    return u


def secant_functional(t: ResultsContract, theta: float, S: ArrayLike, c: CostModel) -> AffineFunctional:
    """Affine interpolant of the payoff ``t - theta c`` on the support ``S``."""
    P = as_points(S)
    return affine_from_graph(P, payoff_function(t, theta, c)(P))


@dataclass(frozen=True)
class SecantVerdict:
    """Secant-hyperplane test for one type; ``gap`` is ``u(q) - s(q)`` at the worst belief."""

    type_index: int
    passed: bool
    secant: AffineFunctional
    worst_belief: NDArray[np.float64]
    gap: float
    on_map: bool

    @property
    def witness(self) -> dict[str, Any] | None:
        if self.passed:
            return None
        return {"type": self.type_index, "belief": self.worst_belief.tolist(), "gap": self.gap, "on_map": self.on_map}


def check_secant_condition(
    X: ChoiceFunction,
    t: ResultsContract,
    Ts: TypeSpace,
    c: CostModel,
    *,
    resolution: int = AUDIT_RESOLUTION,
) -> list[SecantVerdict]:
    """Check ``s_k >= t - theta_k c`` on the whole simplex for every type.

    Listed beliefs are checked directly.  Off the list ``t`` equals the
    default, and ``s_k + theta_k c - default`` is convex, so its minimum is
    located by a grid scan (vertices included) with two refinement levels
    and a local polish.
    """
    if not X.full_dimension:
        raise NotFullDimension(f"support sizes {X.support_sizes} on {X.dim} states")
    out = []
    for k, e in enumerate(X):
        th = float(Ts.thetas[k])
        s = secant_functional(t, th, e.support, c)
        u = payoff_function(t, th, c)
        if t.beliefs.shape[0]:
            on_gaps = u(t.beliefs) - s(t.beliefs)
            i = int(np.argmax(on_gaps))
            worst_on = (t.beliefs[i], float(on_gaps[i]))
        else:
            worst_on = (e.support[0], -np.inf)

        def margin(P: NDArray, s: AffineFunctional = s, th: float = th) -> NDArray:
            return s(P) + th * np.asarray(c(P), dtype=float) - t.default

        q, m = minimize_on_simplex(margin, X.dim, resolution=resolution)
        worst_off = (q, -m)
        belief, gap = max(worst_on, worst_off, key=lambda w: w[1])
        on_map = gap == worst_on[1]
        passed = gap <= _slack(float(s(belief)))
        out.append(SecantVerdict(k, bool(passed), s, np.asarray(belief, dtype=float), float(gap), bool(on_map)))
    return out


# --------------------------------------------------------------------------
# Constructive deviation
# --------------------------------------------------------------------------


def construct_deviation(S: ArrayLike, q: ArrayLike, prior: ArrayLike) -> Experiment:
    """Swap one point of ``S`` for ``q`` while keeping the mean at ``prior``.

    With ``lambda`` the barycentric weights of the prior and ``mu`` those of
    ``q``, the dropped point is ``j = argmin {lambda_i / mu_i : mu_i > 0}``.
    ``q`` receives ``lambda_j / mu_j`` and every other point ``i`` keeps
    ``lambda_i - mu_i lambda_j / mu_j``.  If ``q`` already belongs to ``S``
    the original experiment is returned.
    """
    B = as_points(S)
    p0 = np.asarray(prior, dtype=float)
    x = np.asarray(q, dtype=float)
    lam = barycentric_coords(B, p0)
    if np.any(lam <= 1e-12):
        raise InvalidGeometry("prior must lie in the interior of conv(S)")
    if match_belief(B, x) is not None:
        return Experiment(B, lam)
    mu = barycentric_coords(B, x)
    pos = np.flatnonzero(mu > 0)
    if pos.size == 0:
        raise InvalidGeometry("barycentric weights of q have no positive entry")
    j = int(pos[np.argmin(lam[pos] / mu[pos])])
    ratio = lam[j] / mu[j]
    w = lam - mu * ratio
    w[j] = 0.0
    w[np.abs(w) < 1e-15] = 0.0
    if np.any(w < -1e-12):
        raise InvalidGeometry("deviation weights became negative")
    keep = np.flatnonzero(w > 0)
    support = np.vstack([x[None, :], B[keep]])
    weights = np.concatenate([[ratio], w[keep]])
    return Experiment(support, weights / weights.sum())


# --------------------------------------------------------------------------
# Best-response oracle
# --------------------------------------------------------------------------


def best_response(
    t: Callable[[Any], Any],
    theta: float,
    c: CostModel,
    prior: ArrayLike,
    *,
    extra: ArrayLike | None = None,
    resolution: int = AUDIT_RESOLUTION,
) -> tuple[Experiment, float]:
    """Best Bayes-plausible experiment against payment rule ``t`` for cost type ``theta``.

    ``extra`` beliefs (normally every listed payment belief) join the grid
    so that paid posteriors are never lost to quantization.
    """
    if extra is None and isinstance(t, ResultsContract):
        extra = t.beliefs
    result = concavify(payoff_function(t, theta, c), prior, resolution=resolution, extra=extra, refine=False)
    return result.experiment, result.value


def deviation_payoff(t: Callable[[Any], Any], theta: float, c: CostModel, tau: Experiment) -> float:
    return float(tau.probs @ np.atleast_1d(np.asarray(t(tau.support), dtype=float))) - theta * cost_of_experiment(c, tau)


# --------------------------------------------------------------------------
# Audits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeAudit:
    type_index: int
    theta: float
    incentive_compatible: bool
    witness: dict[str, Any] | None
    truthful_payoff: float
    best_response_value: float
    best_response: Experiment
    expected_payment: float
    target_payment: float
    payment_ok: bool
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.incentive_compatible and self.payment_ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": self.type_index,
            "theta": self.theta,
            "incentive_compatible": self.incentive_compatible,
            "witness": self.witness,
            "truthful_payoff": self.truthful_payoff,
            "best_response_value": self.best_response_value,
            "best_response": {"support": self.best_response.support.tolist(), "probs": self.best_response.probs.tolist()},
            "expected_payment": self.expected_payment,
            "target_payment": self.target_payment,
            "payment_ok": self.payment_ok,
            **self.extra,
        }


@dataclass(frozen=True)
class AuditReport:
    kind: str
    types: tuple[TypeAudit, ...]

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.types)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "passed": self.passed, "types": [a.to_dict() for a in self.types]}


def _payment_ok(paid: float, target: float) -> bool:
    return abs(paid - target) <= PAYMENT_TOL * (1.0 + abs(target))


def audit_results_contract(
    X: ChoiceFunction,
    t: ResultsContract,
    Ts: TypeSpace,
    c: CostModel,
    prior: ArrayLike,
    payments: ArrayLike | None = None,
    *,
    resolution: int = AUDIT_RESOLUTION,
) -> AuditReport:
    """Secant test, best-response cross-check and payment identity per type."""
    target = np.asarray(payments if payments is not None else t_star_payments(Ts.thetas, X.costs(c)), dtype=float)
    secants = check_secant_condition(X, t, Ts, c, resolution=resolution)
    audits = []
    for k, e in enumerate(X):
        th = float(Ts.thetas[k])
        paid = expected_payment(t, e)
        truthful = paid - th * cost_of_experiment(c, e)
        br, value = best_response(t, th, c, prior, resolution=resolution)
        sv = secants[k]
        oracle_ok = value <= truthful + BEST_RESPONSE_TOL
        witness = sv.witness
        if witness is None and not oracle_ok:
            witness = {"type": k, "best_response_gain": value - truthful}
        audits.append(TypeAudit(
            k, th, sv.passed and oracle_ok, witness, truthful, value, br, paid, float(target[k]),
            _payment_ok(paid, float(target[k])),
            {"secant_gap": sv.gap, "secant_passed": sv.passed, "oracle_passed": bool(oracle_ok)},
        ))
    return AuditReport("results", tuple(audits))


def obedience_chain_gap(f: ScreeningResultsContract, k: int, c: CostModel, grid: NDArray) -> float:
    """``max_p [t(k,p) - theta c(p)] - [T - theta H(p)]`` over ``grid`` plus the support."""
    th = float(f.thetas[k])
    P = np.vstack([grid, f.supports[k]])
    lhs = np.asarray(f.payment(k, P)) - th * np.asarray(c(P), dtype=float)
    rhs = f.payments[k] - th * f.hyperplanes[k](P)
    return float(np.max(lhs - rhs))


def audit_screening_contract(
    X: ChoiceFunction,
    f: ScreeningResultsContract,
    Ts: TypeSpace,
    c: CostModel,
    prior: ArrayLike,
    *,
    resolution: int = AUDIT_RESOLUTION,
) -> AuditReport:
    """Obedience (no better experiment after a truthful report) and honesty (no better report)."""
    grid = simplex_grid(X.dim, resolution)
    audits = []
    for k, e in enumerate(X):
        th = float(Ts.thetas[k])
        paid = f.expected_payment(k, e)
        truthful = paid - th * cost_of_experiment(c, e)
        values = {}
        best = None
        for r in range(len(X)):
            br, v = best_response(lambda P, r=r: f.payment(r, P), th, c, prior, extra=f.supports[r], resolution=resolution)
            values[r] = v
            if r == k:
                best = br
        chain = obedience_chain_gap(f, k, c, grid)
        obedient = values[k] <= truthful + OBEDIENCE_TOL and chain <= SECANT_SLACK * (1.0 + abs(truthful))
        honest = all(v <= truthful + OBEDIENCE_TOL for r, v in values.items() if r != k)
        witness = None
        if not (obedient and honest):
            r = max(values, key=values.get)
            witness = {"type": k, "report": r, "gain": values[r] - truthful, "chain_gap": chain}
        audits.append(TypeAudit(
            k, th, obedient and honest, witness, truthful, values[k], best, paid, float(f.payments[k]),
            _payment_ok(paid, float(f.payments[k])),
            {"obedient": obedient, "honest": honest, "report_values": [values[r] for r in range(len(X))], "chain_gap": chain},
        ))
    return AuditReport("forcing", tuple(audits))


def audit_contract(
    X: ChoiceFunction,
    contract: ResultsContract | ScreeningResultsContract,
    Ts: TypeSpace,
    c: CostModel,
    prior: ArrayLike,
    payments: ArrayLike | None = None,
    *,
    resolution: int = AUDIT_RESOLUTION,
) -> AuditReport:
    if isinstance(contract, ScreeningResultsContract):
        return audit_screening_contract(X, contract, Ts, c, prior, resolution=resolution)
    return audit_results_contract(X, contract, Ts, c, prior, payments, resolution=resolution)
