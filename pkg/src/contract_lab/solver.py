"""Per-type relaxed problems: choose the experiment maximizing ``E[v(p) - g c(p)]``.

Two engines are available.  ``concavify-lp`` works for any cost: it evaluates
the objective on a simplex grid and solves the concavification linear program
at the prior.  ``entropy-fixed-point`` is specific to Shannon costs and runs
the Blahut-Arimoto iteration on unconditional action probabilities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidScenario, MonotonicityDiagnostic, NoConvergence, NumericalFailure
from .geometry import (
    AffineFunctional,
    as_points,
    local_grid,
    simplex_grid,
    unique_beliefs,
)
from .lp_core import maximize
from .model import (
    ChoiceFunction,
    CostModel,
    DecisionProblem,
    Experiment,
    ShannonCost,
    TypeSpace,
    cost_of_experiment,
    value_at,
    virtual_types,
)

log = logging.getLogger(__name__)

CONCAVIFY_LP = "concavify-lp"
ENTROPY_FIXED_POINT = "entropy-fixed-point"
ENGINES = (CONCAVIFY_LP, ENTROPY_FIXED_POINT)

PRUNE_THRESHOLD = 1e-9
C_MONOTONE_TOL = 1e-7


@dataclass(frozen=True)
class SolverConfig:
    """Engine choice and numerical knobs; ``engine=None`` picks by cost kind."""

    engine: str | None = None
    resolution: int | None = None
    refine: bool = True
    fixed_point_tol: float = 1e-12
    max_iterations: int = 100_000
    prune_actions: bool = True

    def __post_init__(self) -> None:
        if self.engine is not None and self.engine not in ENGINES:
            raise InvalidScenario(f"unknown engine {self.engine!r}; expected one of {ENGINES}")
        if self.resolution is not None and self.resolution < 8:
            raise InvalidScenario("grid resolution must be at least 8")
        if not 0 < self.fixed_point_tol <= 1e-2:
            raise InvalidScenario("fixed-point tolerance must lie in (0, 1e-2]")
        if self.max_iterations < 1:
            raise InvalidScenario("max_iterations must be positive")

    def engine_for(self, cost: CostModel) -> str:
        if self.engine is not None:
            return self.engine
        return ENTROPY_FIXED_POINT if isinstance(cost, ShannonCost) else CONCAVIFY_LP

    def resolution_for(self, dim: int) -> int:
        if self.resolution is not None:
            return self.resolution
        return {2: 256, 3: 128, 4: 32}.get(dim, 12)

    def to_dict(self) -> dict[str, Any]:
        return {
            "engine": self.engine,
            "resolution": self.resolution,
            "refine": self.refine,
            "fixed_point_tol": self.fixed_point_tol,
            "max_iterations": self.max_iterations,
            "prune_actions": self.prune_actions,
        }


def _rows(fn: Callable[[Any], Any], P: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluate ``fn`` on each row of ``P``, vectorized when ``fn`` supports it."""
    try:
        out = np.asarray(fn(P), dtype=float)
        if out.shape == (P.shape[0],):
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(p)) for p in P])


# --------------------------------------------------------------------------
# Concavification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Concavification:
    """Optimal experiment on a candidate set plus the supporting hyperplane at the prior."""

    experiment: Experiment
    value: float
    supporting: AffineFunctional
    candidates: NDArray[np.float64] = field(repr=False)
    objective: NDArray[np.float64] = field(repr=False)


def _solve_on(candidates: NDArray, phi_vals: NDArray, prior: NDArray) -> Concavification:
    sol = maximize(phi_vals, candidates.T, prior)
    if not sol.optimal:
        raise NumericalFailure(f"concavification LP ended as {sol.status.value}")
    keep = sol.x > 1e-13
    idx = np.flatnonzero(keep)
    w = sol.x[idx] / sol.x[idx].sum()
    support = candidates[idx]
    order = np.lexsort(support.T[::-1])
    tau = Experiment(support[order], w[order])
    return Concavification(tau, float(sol.objective_value), AffineFunctional(sol.dual), candidates, phi_vals)


def concavify(
    phi: Callable[[Any], Any],
    prior: ArrayLike,
    *,
    resolution: int = 64,
    extra: ArrayLike | None = None,
    refine: bool = True,
) -> Concavification:
    """Maximize ``E_tau[phi]`` over Bayes-plausible ``tau`` supported on a grid.

    The candidate set is ``simplex_grid(resolution)``, the optional ``extra``
    beliefs and the prior itself (which keeps the LP feasible).  With
    ``refine`` the solve is repeated after adding a grid eight times finer in
    the ``1/resolution`` neighbourhood of each support point.  When the prior
    attains the optimum the point mass at the prior is returned.
    """
    p0 = np.asarray(prior, dtype=float)
    parts = [simplex_grid(p0.size, resolution), p0[None, :]]
    if extra is not None and np.size(extra):
        parts.append(as_points(extra))
    cand = unique_beliefs(np.vstack(parts))
    vals = _rows(phi, cand)
    result = _solve_on(cand, vals, p0)
    if refine:
        cand, vals = _refined_candidates(phi, cand, vals, [result.experiment], resolution)
        result = _solve_on(cand, vals, p0)
    return _prefer_prior(phi, p0, result)


def _refined_candidates(
    phi: Callable[[Any], Any],
    cand: NDArray,
    vals: NDArray,
    experiments: list[Experiment],
    resolution: int,
) -> tuple[NDArray, NDArray]:
    fine = 8 * resolution
    local = [local_grid(s, fine, 8) for e in experiments for s in e.support]
    new = unique_beliefs(np.vstack(local))
    new_vals = _rows(phi, new)
    return np.vstack([cand, new]), np.concatenate([vals, new_vals])


def _prefer_prior(phi: Callable[[Any], Any], p0: NDArray, result: Concavification) -> Concavification:
    at_prior = float(_rows(phi, p0[None, :])[0])
    if result.experiment.size > 1 and at_prior >= result.value - 1e-10 * (1.0 + abs(result.value)):
        return replace(result, experiment=Experiment.point_mass(p0), value=at_prior)
    return result


def relaxed_objective(D: DecisionProblem, cost: CostModel, g: float) -> Callable[[Any], Any]:
    """``p -> v(p) - g c(p)``, vectorized over rows."""

    def phi(P: ArrayLike) -> NDArray[np.float64]:
        X = as_points(P)
        return value_at(D, X) - g * np.asarray(cost(X), dtype=float).reshape(-1)

    return phi


# --------------------------------------------------------------------------
# Blahut-Arimoto fixed point for Shannon costs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointResult:
    experiment: Experiment
    action_probs: NDArray[np.float64]
    retained_actions: tuple[int, ...]
    iterations: int


def _inclusion_ratios(Z: NDArray, q: NDArray, prior: NDArray) -> NDArray:
    """Caplin-Dean-Leahy statistic per action; at an optimum it is <= 1, with equality on the support."""
    denom = Z @ q
    return prior @ (Z / denom[:, None])


def _dual_objective(Z: NDArray, q: NDArray, prior: NDArray) -> float:
    """Concave function of ``q`` whose maximizers are the fixed points."""
    return float(prior @ np.log(Z @ q))


def solve_entropy_fixed_point(
    D: DecisionProblem,
    lam: float,
    cfg: SolverConfig | None = None,
    *,
    log_base: float = math.e,
) -> Experiment:
    """Optimal experiment for ``E[v] - lam * C`` with a Shannon cost in base ``log_base``."""
    return entropy_fixed_point(D, lam, cfg, log_base=log_base).experiment


def entropy_fixed_point(
    D: DecisionProblem,
    lam: float,
    cfg: SolverConfig | None = None,
    *,
    log_base: float = math.e,
) -> FixedPointResult:
    cfg = cfg or SolverConfig()
    if lam <= 0:
        raise ValueError("cost multiplier must be positive")
    kappa = lam / math.log(log_base)
    prior = D.prior
    U = D.utility.T  # states x actions
    Z = np.exp((U - U.max(axis=1, keepdims=True)) / kappa)
    n_actions = Z.shape[1]

    # For kappa far above the utility spread the plain update moves q by
    # O(spread / kappa) per step, and ties between actions are resolved only
    # at second order.  Raising the ratios to a power eta keeps the fixed
    # points; eta adapts under a monotone safeguard on the dual objective.
    spread = float(np.ptp(U)) or 1.0
    eta_max = max(1.0, (kappa / spread) ** 2)

    active = np.ones(n_actions, dtype=bool)
    readded = np.zeros(n_actions, dtype=bool)
    q = np.full(n_actions, 1.0 / n_actions)
    iterations = 0
    stall_check = 2000
    while True:
        converged = False
        eta = 1.0
        while iterations < cfg.max_iterations:
            Za = Z[:, active]
            qa = q[active]
            ratios = _inclusion_ratios(Za, qa, prior)
            base = _dual_objective(Za, qa, prior)
            while True:
                q_new = qa * ratios**eta
                q_new /= q_new.sum()
                if eta == 1.0 or _dual_objective(Za, q_new, prior) >= base - 1e-15 * (1.0 + abs(base)):
                    break
                eta = max(1.0, eta / 2)
            eta = min(eta_max, 2 * eta)
            step = float(np.max(np.abs(q_new - qa)))
            q[active] = q_new
            iterations += 1
            if cfg.prune_actions:
                drop = active & (q < PRUNE_THRESHOLD)
                if iterations % stall_check == 0:
                    # slowly vanishing actions: drop tentatively, certified below
                    drop |= active & ~readded & (q < 1e-6)
                if drop.any() and (active & ~drop).any():
                    active &= ~drop
                    q[~active] = 0.0
                    q /= q.sum()
                    continue
            if step < cfg.fixed_point_tol:
                converged = True
                break
        if not converged:
            raise NoConvergence(f"fixed point not reached in {cfg.max_iterations} iterations")
        ratios = _inclusion_ratios(Z, q, prior)
        violators = ~active & (ratios > 1.0 + 1e-9)
        if not violators.any():
            break
        if np.all(readded[violators]):
            raise NumericalFailure("pruned action passes the optimality test after re-inclusion")
        readded |= violators
        active |= violators
        q[violators] = 1e-6
        q /= q.sum()

    kept = np.flatnonzero(active)
    denom = Z[:, kept] @ q[kept]
    post = (prior[:, None] * Z[:, kept] / denom[:, None]).T
    post /= post.sum(axis=1, keepdims=True)
    probs = q[kept] / q[kept].sum()
    support, weights = _merge_duplicates(post, probs)
    return FixedPointResult(Experiment(support, weights), q.copy(), tuple(int(a) for a in kept), iterations)


def _merge_duplicates(points: NDArray, probs: NDArray, tol: float = 1e-9) -> tuple[NDArray, NDArray]:
    out_p: list[NDArray] = []
    out_w: list[float] = []
    for p, w in zip(points, probs):
        for i, q in enumerate(out_p):
            if np.max(np.abs(p - q)) < tol:
                out_w[i] += w
                break
        else:
            out_p.append(p)
            out_w.append(float(w))
    return np.array(out_p), np.array(out_w)


# --------------------------------------------------------------------------
# Support reduction
# --------------------------------------------------------------------------


def reduce_support(tau: Experiment, phi: Callable[[Any], Any]) -> Experiment:
    """Replace ``tau`` by a basic optimal experiment on its own support.

    Keeps the mean, never lowers ``E[phi]`` and returns affinely independent
    support; already non-redundant experiments come back unchanged.
    """
    if tau.non_redundant:
        return tau
    vals = _rows(phi, tau.support)
    sol = maximize(vals, tau.support.T, tau.mean())
    if not sol.optimal:
        raise NumericalFailure(f"support reduction LP ended as {sol.status.value}")
    idx = np.flatnonzero(sol.x > 1e-13)
    w = sol.x[idx] / sol.x[idx].sum()
    return Experiment(tau.support[idx], w)


# --------------------------------------------------------------------------
# Choice functions
# --------------------------------------------------------------------------


class _ScenarioLike(Protocol):
    decision: DecisionProblem | None
    types: TypeSpace
    cost: CostModel
    solver: SolverConfig


def solve_choice_function(scenario: _ScenarioLike, cfg: SolverConfig | None = None) -> ChoiceFunction:
    """Solve every type's relaxed problem with virtual type ``g(theta)``.

    When ``g`` is strictly increasing the resulting costs must be
    non-decreasing along the type order; a numerical breach raises
    :class:`MonotonicityDiagnostic`.
    """
    cfg = cfg or scenario.solver
    D = scenario.decision
    if D is None:
        raise InvalidScenario("scenario has no decision problem to solve")
    cost = scenario.cost
    vt = virtual_types(scenario.types)
    engine = cfg.engine_for(cost)

    if engine == ENTROPY_FIXED_POINT:
        if not isinstance(cost, ShannonCost):
            raise InvalidScenario("the entropy fixed-point engine needs a Shannon cost")
        if not np.allclose(cost.prior, D.prior, atol=1e-12):
            raise InvalidScenario("entropy cost prior differs from the decision prior")
        experiments = [
            solve_entropy_fixed_point(D, float(g), cfg, log_base=cost.log_base) for g in vt.values
        ]
    else:
        experiments = _solve_types_lp(D, cost, vt.values, cfg)

    X = ChoiceFunction(
        tuple(experiments),
        meta={"engine": engine, "virtual_types": vt.values.tolist(), "g_strictly_increasing": vt.strictly_increasing},
    )
    costs = X.costs(cost)
    if vt.strictly_increasing:
        for k in range(len(costs) - 1):
            if costs[k + 1] < costs[k] - C_MONOTONE_TOL:
                raise MonotonicityDiagnostic(
                    f"solved costs decrease from type {k + 1} to {k + 2}",
                    {"pair": (k, k + 1), "costs": (float(costs[k]), float(costs[k + 1]))},
                )
    else:
        log.warning("virtual types are not strictly increasing; c-monotonicity is not guaranteed")
    return X


def _solve_types_lp(D: DecisionProblem, cost: CostModel, gs: NDArray, cfg: SolverConfig) -> list[Experiment]:
    """Grid concavification for each type over one shared candidate set.

    Refinement points found for any type are added for every type, so all
    types optimize over the same feasible set.
    """
    p0 = D.prior
    res = cfg.resolution_for(D.n_states)
    cand = unique_beliefs(np.vstack([simplex_grid(D.n_states, res), p0[None, :]]))
    v = value_at(D, cand)
    cvals = np.asarray(cost(cand), dtype=float)
    results = [_solve_on(cand, v - g * cvals, p0) for g in gs]
    if cfg.refine:
        fine = 8 * res
        local = [local_grid(s, fine, 8) for r in results for s in r.experiment.support]
        new = unique_beliefs(np.vstack(local))
        cand = np.vstack([cand, new])
        v = np.concatenate([v, value_at(D, new)])
        cvals = np.concatenate([cvals, np.asarray(cost(new), dtype=float)])
        results = [_solve_on(cand, v - g * cvals, p0) for g in gs]
    out = []
    for g, r in zip(gs, results):
        phi = relaxed_objective(D, cost, float(g))
        out.append(_prefer_prior(phi, p0, r).experiment)
    return out


def objective_value(D: DecisionProblem, cost: CostModel, g: float, tau: Experiment) -> float:
    """``E_tau[v(p) - g c(p)]``."""
    return tau.expectation(relaxed_objective(D, cost, g))


def experiment_cost(cost: CostModel, tau: Experiment) -> float:
    return cost_of_experiment(cost, tau)
