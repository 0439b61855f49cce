"""Decision problems, posterior-separable costs, type spaces and experiments."""

from __future__ import annotations

import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, InvalidScenario
from .geometry import (
    BELIEF_TOL,
    as_belief,
    as_points,
    is_affinely_independent,
    simplex_grid,
)

DEFAULT_PLAUSIBILITY_TOL = 1e-6
ARGMAX_TOL = 1e-10


# --------------------------------------------------------------------------
# Decision problem
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecisionProblem:
    """Principal's decision problem: actions, state-action utility and prior.

    ``utility[a, w]`` is the payoff of action ``a`` in state ``w``.
    """

    states: tuple[str, ...]
    actions: tuple[str, ...]
    utility: NDArray[np.float64]
    prior: NDArray[np.float64]

    def __post_init__(self) -> None:
        U = np.array(self.utility, dtype=float)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        if U.shape != (len(self.actions), len(self.states)):
            raise DimensionMismatch(
                f"utility matrix {U.shape} does not match {len(self.actions)} actions x {len(self.states)} states"
            )
        p0 = as_belief(self.prior)
        if p0.size != len(self.states):
            raise DimensionMismatch("prior length differs from the number of states")
        if np.any(p0 <= 0):
            raise InvalidScenario("prior must have full support")
        U.setflags(write=False)
        object.__setattr__(self, "utility", U)
        object.__setattr__(self, "prior", p0)

    @property
    def n_states(self) -> int:
        return len(self.states)


def value_function(D: DecisionProblem, p: ArrayLike) -> tuple[float, tuple[str, ...]]:
    """Best expected utility at belief ``p`` and every action attaining it."""
    x = np.asarray(p, dtype=float)
    if x.shape != (D.n_states,):
        raise DimensionMismatch(f"belief of length {x.size} for {D.n_states} states")
    payoffs = D.utility @ x
    best = float(payoffs.max())
    winners = tuple(a for a, val in zip(D.actions, payoffs) if val >= best - ARGMAX_TOL)
    return best, winners


def value_at(D: DecisionProblem, P: ArrayLike) -> NDArray[np.float64]:
    """Vectorized ``v`` over the rows of ``P``."""
    return (as_points(P) @ D.utility.T).max(axis=1)


# --------------------------------------------------------------------------
# Cost models
# --------------------------------------------------------------------------


class CostModel(ABC):
    """Convex belief cost ``c`` with ``c(prior) == 0``.

    Calling the model on one belief returns a float; on a 2-D array it
    returns one value per row.
    """

    kind: str = ""

    def __call__(self, p: ArrayLike) -> Any:
        x = np.asarray(p, dtype=float)
        out = self._evaluate(np.atleast_2d(x))
        return float(out[0]) if x.ndim == 1 else out

    @abstractmethod
    def _evaluate(self, P: NDArray[np.float64]) -> NDArray[np.float64]: ...

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    @property
    def strictly_convex(self) -> bool:
        return True


class ShannonCost(CostModel):
    """Entropy-reduction cost normalized at the prior.

    Evaluated as the Kullback-Leibler divergence ``sum p log(p / p0)``, which
    equals ``H(p0) - H(p)`` for a uniform prior and gives the same experiment
    cost for every Bayes-plausible experiment under any prior.
    """

    kind = "shannon-entropy"

    def __init__(self, prior: ArrayLike, log_base: float = math.e):
        self.prior = as_belief(prior)
        if np.any(self.prior <= 0):
            raise InvalidScenario("entropy cost needs a full-support prior")
        if log_base <= 0 or log_base == 1:
            raise InvalidScenario(f"invalid logarithm base {log_base}")
        self.log_base = float(log_base)
        self._log_p0 = np.log(self.prior)

    def _evaluate(self, P: NDArray[np.float64]) -> NDArray[np.float64]:
        safe = np.clip(P, 1e-300, None)
        terms = np.where(P > 0, P * (np.log(safe) - self._log_p0), 0.0)
        return terms.sum(axis=1) / math.log(self.log_base)

    def to_dict(self) -> dict[str, Any]:
        base: Any = "e" if self.log_base == math.e else self.log_base
        return {"kind": self.kind, "log_base": base}


class QuadraticCost(CostModel):
    """Squared Euclidean distance from ``center`` (the prior by default)."""

    kind = "quadratic"

    def __init__(self, center: ArrayLike):
        self.center = as_belief(center)

    def _evaluate(self, P: NDArray[np.float64]) -> NDArray[np.float64]:
        return ((P - self.center) ** 2).sum(axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "center": self.center.tolist()}


class TabulatedCost(CostModel):
    """Cost given on ``simplex_grid(dim, resolution)``, interpolated linearly
    on the Kuhn triangulation of each grid cell.
    """

    kind = "tabulated"

    def __init__(self, dim: int, resolution: int, values: ArrayLike):
        self.dim = int(dim)
        self.resolution = int(resolution)
        vals = np.asarray(values, dtype=float).ravel()
        grid = simplex_grid(self.dim, self.resolution)
        if vals.size != grid.shape[0]:
            raise InvalidScenario(
                f"tabulated cost needs {grid.shape[0]} values for dim={dim}, resolution={resolution}"
            )
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise InvalidScenario("tabulated cost values must be finite and non-negative")
        self.values = vals
        counts = np.rint(grid * self.resolution).astype(np.int64)
        self._index = {tuple(row): i for i, row in enumerate(counts)}

    @property
    def strictly_convex(self) -> bool:
        return False

    def _evaluate(self, P: NDArray[np.float64]) -> NDArray[np.float64]:
        R = self.resolution
        out = np.empty(P.shape[0])
        # cumulative coordinates turn the simplex lattice into a cube lattice
        Z = np.cumsum(P[:, :-1], axis=1) * R
        for r, z in enumerate(Z):
            base = np.floor(z + 1e-12)
            frac = np.clip(z - base, 0.0, 1.0)
            k = z.size
            order = sorted(range(k), key=lambda i: (-frac[i], -i))
            fr = frac[order]
            weights = np.concatenate([[1.0 - fr[0]], fr[:-1] - fr[1:], [fr[-1]]]) if k else np.ones(1)
            vertex = base.copy()
            total = 0.0
            for j in range(k + 1):
                if j > 0:
                    vertex[order[j - 1]] += 1
                if weights[j] <= 0:
                    continue
                cum = np.concatenate([[0.0], vertex, [R]])
                counts = tuple(np.rint(np.diff(cum)).astype(np.int64))
                total += weights[j] * self.values[self._index[counts]]
            out[r] = total
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "resolution": self.resolution,
            "values": self.values.tolist(),
        }


def check_cost_model(c: CostModel, prior: ArrayLike, *, seed: int = 0, pairs: int = 64) -> None:
    """Validate ``c(prior) == 0`` and spot-check strict convexity at midpoints."""
    p0 = np.asarray(prior, dtype=float)
    if abs(c(p0)) > 1e-9:
        raise InvalidScenario(f"cost at the prior is {c(p0)}, expected 0")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(p0.size), size=pairs)
    Q = rng.dirichlet(np.ones(p0.size), size=pairs)
    mid = c(0.5 * P + 0.5 * Q)
    chord = 0.5 * c(P) + 0.5 * c(Q)
    distinct = np.max(np.abs(P - Q), axis=1) > BELIEF_TOL
    bad = distinct & ~(mid < chord - 1e-12)
    if np.any(bad):
        msg = f"cost is not strictly convex on {int(bad.sum())} of {pairs} sampled pairs"
        if c.strictly_convex:
            raise InvalidScenario(msg)
        warnings.warn(msg, stacklevel=2)


# --------------------------------------------------------------------------
# Types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeSpace:
    """Researcher cost types ``thetas[0] > thetas[1] > ... > 0`` with full-support pmf."""

    thetas: NDArray[np.float64]
    pmf: NDArray[np.float64]

    def __post_init__(self) -> None:
        th = np.array(self.thetas, dtype=float).ravel()
        f = np.array(self.pmf, dtype=float).ravel()
        if th.size == 0 or th.size != f.size:
            raise InvalidScenario("thetas and pmf must be non-empty and of equal length")
        if np.any(th <= 0) or np.any(np.diff(th) >= 0):
            raise InvalidScenario("thetas must be positive and strictly decreasing")
        if np.any(f <= 0) or abs(f.sum() - 1.0) > 1e-9:
            raise InvalidScenario("pmf must be positive and sum to 1")
        th.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "pmf", f)

    def __len__(self) -> int:
        return self.thetas.size

    def cdf(self) -> NDArray[np.float64]:
        """``F(theta_k)``: probability of a type no larger than ``theta_k``."""
        return np.cumsum(self.pmf[::-1])[::-1]


@dataclass(frozen=True)
class VirtualTypes:
    values: NDArray[np.float64]
    strictly_increasing: bool


def virtual_types(T: TypeSpace) -> VirtualTypes:
    """Information-rent-adjusted types, listed in the type-space order.

    ``strictly_increasing`` reports whether ``g`` increases with ``theta``,
    i.e. whether the list is strictly decreasing.
    """
    th, f = T.thetas, T.pmf
    F = T.cdf()
    g = th.copy()
    for k in range(th.size - 1):
        g[k] = th[k] + F[k + 1] / f[k] * (th[k] - th[k + 1])
    return VirtualTypes(g, bool(np.all(np.diff(g) < 0)))


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    """Finite distribution over posteriors: ``support[i]`` occurs with ``probs[i]``."""

    support: NDArray[np.float64]
    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        S = as_points(self.support).copy()
        w = np.array(self.probs, dtype=float).ravel()
        if S.shape[0] != w.size or w.size == 0:
            raise DimensionMismatch("support and probabilities must have matching non-zero length")
        if np.any(w <= 0):
            raise ValueError("experiment probabilities must be positive")
        if np.any(S < -1e-12) or np.any(np.abs(S.sum(axis=1) - 1.0) > 1e-6):
            raise ValueError("support rows must be beliefs")
        for i in range(S.shape[0]):
            for j in range(i):
                if np.max(np.abs(S[i] - S[j])) < BELIEF_TOL:
                    raise ValueError(f"support beliefs {j} and {i} coincide")
        S.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", S)
        object.__setattr__(self, "probs", w)

    @classmethod
    def point_mass(cls, p: ArrayLike) -> Experiment:
        return cls(np.atleast_2d(np.asarray(p, dtype=float)), [1.0])

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def mean(self) -> NDArray[np.float64]:
        return self.probs @ self.support

    def expectation(self, fn: Any) -> float:
        return float(self.probs @ np.asarray(fn(self.support), dtype=float))

    @property
    def non_redundant(self) -> bool:
        return is_affinely_independent(self.support)

    @property
    def full_dimension(self) -> bool:
        return self.size == self.dim and self.non_redundant


def cost_of_experiment(c: CostModel, tau: Experiment) -> float:
    return float(tau.probs @ c(tau.support))


@dataclass(frozen=True)
class PlausibilityReport:
    ok: bool
    max_deviation: float
    prob_sum_error: float
    mean: NDArray[np.float64]
    violations: tuple[str, ...] = ()


def validate_experiment(tau: Experiment, prior: ArrayLike, tol: float = DEFAULT_PLAUSIBILITY_TOL) -> PlausibilityReport:
    """Check Bayes plausibility against ``prior`` without raising."""
    p0 = np.asarray(prior, dtype=float)
    problems = []
    if tau.dim != p0.size:
        return PlausibilityReport(False, math.inf, math.inf, np.full(tau.dim, np.nan), ("dimension mismatch",))
    mean = tau.mean()
    dev = float(np.max(np.abs(mean - p0)))
    sum_err = abs(float(tau.probs.sum()) - 1.0)
    if dev > tol:
        problems.append(f"mean posterior deviates from the prior by {dev:.3g} > {tol:.3g}")
    if sum_err > 1e-10:
        problems.append(f"probabilities sum to 1{'+' if tau.probs.sum() > 1 else '-'}{sum_err:.3g}")
    return PlausibilityReport(not problems, dev, sum_err, mean, tuple(problems))


@dataclass(frozen=True)
class ChoiceFunction:
    """One experiment per type, in type-space order (least efficient first)."""

    experiments: tuple[Experiment, ...]
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "experiments", tuple(self.experiments))
        if not self.experiments:
            raise ValueError("choice function needs at least one experiment")
        dims = {e.dim for e in self.experiments}
        if len(dims) != 1:
            raise DimensionMismatch("experiments live on different state spaces")

    def __len__(self) -> int:
        return len(self.experiments)

    def __getitem__(self, k: int) -> Experiment:
        return self.experiments[k]

    def __iter__(self):
        return iter(self.experiments)

    @property
    def dim(self) -> int:
        return self.experiments[0].dim

    @property
    def supports(self) -> list[NDArray[np.float64]]:
        return [e.support for e in self.experiments]

    @property
    def support_sizes(self) -> tuple[int, ...]:
        return tuple(e.size for e in self.experiments)

    @property
    def non_redundant(self) -> bool:
        return all(e.non_redundant for e in self.experiments)

    @property
    def full_dimension(self) -> bool:
        return all(e.full_dimension for e in self.experiments)

    def costs(self, c: CostModel) -> NDArray[np.float64]:
        return np.array([cost_of_experiment(c, e) for e in self.experiments])

    def validate(self, prior: ArrayLike, tol: float = DEFAULT_PLAUSIBILITY_TOL) -> list[PlausibilityReport]:
        return [validate_experiment(e, prior, tol) for e in self.experiments]


def experiments_from(supports: Sequence[ArrayLike], probs: Sequence[ArrayLike]) -> ChoiceFunction:
    return ChoiceFunction(tuple(Experiment(s, w) for s, w in zip(supports, probs)))
