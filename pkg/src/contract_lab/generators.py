"""Seeded random instances for the property suite.

Three generators are provided: decision-problem scenarios to be solved,
full-dimension choice functions drawn directly on the simplex (with a
symmetric variant under a quadratic cost), and incentive-compatible payment
schedules for a given choice function.  ``CONTRACT_LAB_SEED`` in the
environment replaces the base seed of every generator.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .contracts import ic_violations
from .geometry import barycentric_coords
from .model import (
    ChoiceFunction,
    CostModel,
    DecisionProblem,
    Experiment,
    QuadraticCost,
    ShannonCost,
    TypeSpace,
    virtual_types,
)
from .solver import SolverConfig

DEFAULT_SEED = 20240917
SEED_ENV = "CONTRACT_LAB_SEED"


def base_seed(default: int = DEFAULT_SEED) -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else default


def rng_for(index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for instance ``index`` of a given stream."""
    return np.random.default_rng([base_seed(), stream, index])


@dataclass(frozen=True)
class RandomScenario:
    """Duck-types the scenario interface expected by ``solve_choice_function``."""

    decision: DecisionProblem
    types: TypeSpace
    cost: CostModel
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def prior(self) -> NDArray[np.float64]:
        return self.decision.prior


def random_types(rng: np.random.Generator, n_types: int, *, increasing_g: bool = True) -> TypeSpace:
    """Strictly decreasing thetas with a full-support pmf; optionally regular virtual types."""
    for _ in range(1000):
        th = np.sort(rng.uniform(0.5, 4.0, n_types))[::-1]
        if n_types > 1 and np.min(-np.diff(th)) < 0.05:
            continue
        pmf = rng.dirichlet(np.full(n_types, 4.0))
        if np.min(pmf) < 0.05:
            continue
        T = TypeSpace(th, pmf)
        if not increasing_g or virtual_types(T).strictly_increasing:
            return T
    raise RuntimeError("could not draw a regular type space")


def random_scenario(index: int, n_states: int, n_types: int, *, cost_kind: str = "shannon") -> RandomScenario:
    """Decision problem with ``n_states + 1`` actions, an interior prior and regular types."""
    rng = rng_for(index, stream=1)
    prior = rng.dirichlet(np.full(n_states, 6.0))
    prior = np.clip(prior, 0.08, None)
    prior /= prior.sum()
    U = rng.uniform(0.0, 6.0, size=(n_states + 1, n_states))
    D = DecisionProblem(
        tuple(f"w{i + 1}" for i in range(n_states)),
        tuple(f"a{i + 1}" for i in range(n_states + 1)),
        U,
        prior,
    )
    types = random_types(rng, n_types)
    cost: CostModel = ShannonCost(prior) if cost_kind == "shannon" else QuadraticCost(prior)
    return RandomScenario(D, types, cost)


def _tangent_basis(n: int) -> NDArray[np.float64]:
    """Orthonormal basis of the zero-sum subspace of R^n, one vector per row."""
    A = np.eye(n) - 1.0 / n
    q, _ = np.linalg.qr(A[:, : n - 1])
    return q.T


def _regular_directions(n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """``n`` unit zero-sum vectors summing to zero, randomly rotated in the tangent space."""
    E = np.eye(n) - 1.0 / n
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    B = _tangent_basis(n)
    coords = E @ B.T
    R, _ = np.linalg.qr(rng.normal(size=(n - 1, n - 1)))
    return (coords @ R) @ B


def random_full_dimension_experiment(prior: NDArray, spread: float, rng: np.random.Generator, jitter: float = 0.6) -> Experiment:
    """``|Omega|`` affinely independent posteriors around ``prior`` with positive weights."""
    n = prior.size
    for _ in range(1000):
        dirs = _regular_directions(n, rng) + jitter * rng.normal(size=(n, n)) / np.sqrt(n)
        dirs -= dirs.mean(axis=1, keepdims=True)
        S = prior + spread * dirs
        if np.any(S <= 1e-3):
            continue
        S /= S.sum(axis=1, keepdims=True)
        try:
            lam = barycentric_coords(S, prior)
        except ValueError:
            continue
        if np.all(lam > 0.02):
            return Experiment(S, lam / lam.sum())
    raise RuntimeError("could not draw a full-dimension experiment")


def random_choice_function(index: int, n_states: int, n_types: int, *, stream: int = 2) -> tuple[ChoiceFunction, NDArray]:
    """Full-dimension choice function with spreads growing in the type index, and its prior."""
    rng = rng_for(index, stream)
    prior = rng.dirichlet(np.full(n_states, 8.0))
    prior = np.clip(prior, 0.15, None)
    prior /= prior.sum()
    room = float(prior.min())
    spreads = np.sort(rng.uniform(0.2, 0.9, n_types)) * room
    X = ChoiceFunction(tuple(random_full_dimension_experiment(prior, s, rng) for s in spreads))
    return X, prior


def symmetric_choice_function(index: int, n_states: int, n_types: int) -> tuple[ChoiceFunction, NDArray, QuadraticCost]:
    """Supports on spheres around the prior with non-decreasing radii; symmetric for the quadratic cost."""
    rng = rng_for(index, stream=3)
    prior = rng.dirichlet(np.full(n_states, 8.0))
    prior = np.clip(prior, 0.15, None)
    prior /= prior.sum()
    room = float(prior.min())
    radii = np.sort(rng.uniform(0.2, 0.9, n_types)) * room
    exps = []
    for r in radii:
        dirs = _regular_directions(n_states, rng)
        S = prior + r * dirs
        lam = barycentric_coords(S, prior)
        exps.append(Experiment(S, lam / lam.sum()))
    return ChoiceFunction(tuple(exps)), prior, QuadraticCost(prior)


def binary_choice_function(index: int, n_types: int) -> tuple[ChoiceFunction, NDArray]:
    """Two-state choice function; each experiment has two posteriors bracketing the prior."""
    rng = rng_for(index, stream=4)
    p = float(rng.uniform(0.3, 0.7))
    exps = []
    for _ in range(n_types):
        lo = float(rng.uniform(0.02, p - 0.02))
        hi = float(rng.uniform(p + 0.02, 0.98))
        w_lo = (hi - p) / (hi - lo)
        exps.append(Experiment([[lo, 1 - lo], [hi, 1 - hi]], [w_lo, 1 - w_lo]))
    return ChoiceFunction(tuple(exps)), np.array([p, 1 - p])


def random_ic_schedule(thetas: NDArray, costs: NDArray, rng: np.random.Generator, *, tries: int = 10_000) -> NDArray | None:
    """An IR/IC payment schedule for the given costs, or ``None`` if none was found.

    Candidate rents are drawn around the band allowed by adjacent IC
    constraints, widened on both sides, and kept only if the full IR/IC
    check passes.
    """
    n = thetas.size
    for _ in range(tries):
        rent = np.empty(n)
        rent[0] = rng.exponential(0.2) - 0.02
        for k in range(1, n):
            lo = rent[k - 1] + (thetas[k - 1] - thetas[k]) * costs[k - 1]
            hi = rent[k - 1] + (thetas[k - 1] - thetas[k]) * costs[k]
            width = max(hi - lo, 1e-3)
            rent[k] = rng.uniform(lo - 0.1 * width, hi + 0.1 * width)
        S = thetas * costs + rent
        if not ic_violations(S, thetas, costs, slack=0.0):
            return S
    return None
