"""Methods-based payments and the two results-based implementations.

``payments_T_star`` gives the cheapest incentive-compatible payment schedule
for a c-monotone choice function.  ``build_forcing_contract`` implements any
IC methods-based contract with a type-contingent rule, and
``build_results_contract`` implements ``T*`` with a single payment rule on
beliefs when the choice function is strongly c-monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    NotCMonotone,
    NotFullDimension,
    NotIncentiveCompatible,
    NotStronglyCMonotone,
    OverlappingSupports,
    PaymentMismatch,
    RedundantSupport,
)
from .geometry import BELIEF_TOL, AffineFunctional, affine_from_graph, as_points, minimize_on_simplex, vertices
from .model import ChoiceFunction, CostModel, Experiment, TypeSpace
from .monotonicity import check_c_monotone, check_strong_c_monotone, interpolants

IC_SLACK = 1e-9
PAYMENT_TOL = 1e-9
FLOOR_MARGIN = 1e-6


# --------------------------------------------------------------------------
# Methods-based contracts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodsContract:
    """Experiment choice function with per-type payments ``T(theta)``."""

    choice: ChoiceFunction
    payments: NDArray[np.float64]
    thetas: NDArray[np.float64]
    costs: NDArray[np.float64]

    def __post_init__(self) -> None:
        for name in ("payments", "thetas", "costs"):
            a = np.array(getattr(self, name), dtype=float).ravel()
            if a.size != len(self.choice):
                raise ValueError(f"{name} needs one entry per type")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def payoff(self, true_type: int, report: int) -> float:
        """Researcher payoff of type ``true_type`` claiming ``report`` and obeying."""
        return float(self.payments[report] - self.thetas[true_type] * self.costs[report])

    def violations(self, slack: float = IC_SLACK) -> list[dict[str, Any]]:
        return ic_violations(self.payments, self.thetas, self.costs, slack)

    @property
    def incentive_compatible(self) -> bool:
        return not self.violations()


def ic_violations(payments: ArrayLike, thetas: ArrayLike, costs: ArrayLike, slack: float = IC_SLACK) -> list[dict[str, Any]]:
    """IR/IC violations of a payment schedule given per-type experiment costs."""
    T = np.asarray(payments, dtype=float)
    th = np.asarray(thetas, dtype=float)
    C = np.asarray(costs, dtype=float)
    out = []
    for k in range(T.size):
        truthful = T[k] - th[k] * C[k]
        if truthful < -slack:
            out.append({"kind": "IR", "type": k, "payoff": float(truthful)})
        for r in range(T.size):
            deviation = T[r] - th[k] * C[r]
            if r != k and deviation > truthful + slack:
                out.append({"kind": "IC", "type": k, "report": r, "payoff": float(deviation), "truthful": float(truthful)})
    return out


def t_star_payments(thetas: ArrayLike, costs: ArrayLike) -> NDArray[np.float64]:
    """``T*`` from the type list and experiment costs, without any checks."""
    th = np.asarray(thetas, dtype=float)
    C = np.asarray(costs, dtype=float)
    T = th * C
    rent = 0.0
    for k in range(1, th.size):
        rent += (th[k - 1] - th[k]) * C[k - 1]
        T[k] += rent
    return T


def payments_T_star(X: ChoiceFunction, Ts: TypeSpace, c: CostModel) -> NDArray[np.float64]:
    """Cheapest IC payments: IR binds for ``theta_1`` and each downward-adjacent IC binds."""
    verdict = check_c_monotone(X, c)
    if not verdict.passed:
        raise NotCMonotone("choice function is not c-monotone; no payments make it incentive compatible", verdict.witness)
    return t_star_payments(Ts.thetas, X.costs(c))


def methods_contract(X: ChoiceFunction, payments: ArrayLike, Ts: TypeSpace, c: CostModel) -> MethodsContract:
    return MethodsContract(X, np.asarray(payments, dtype=float), Ts.thetas, X.costs(c))


# --------------------------------------------------------------------------
# Type-contingent forcing contract
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScreeningResultsContract:
    """Pays ``T(theta)`` on ``supp X(theta)`` after report ``theta`` and ``floor`` otherwise."""

    thetas: NDArray[np.float64]
    supports: tuple[NDArray[np.float64], ...]
    payments: NDArray[np.float64]
    floor: float
    hyperplanes: tuple[AffineFunctional, ...]

    def payment(self, report: int, p: ArrayLike) -> float | NDArray[np.float64]:
        P = as_points(p)
        S = self.supports[report]
        hit = np.min(np.max(np.abs(P[:, None, :] - S[None, :, :]), axis=2), axis=1) < BELIEF_TOL
        out = np.where(hit, self.payments[report], self.floor)
        return float(out[0]) if np.ndim(p) == 1 else out

    def expected_payment(self, report: int, tau: Experiment) -> float:
        return float(tau.probs @ np.atleast_1d(self.payment(report, tau.support)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "forcing",
            "thetas": self.thetas.tolist(),
            "supports": [S.tolist() for S in self.supports],
            "payments": self.payments.tolist(),
            "floor": self.floor,
            "hyperplanes": [h.coefficients.tolist() for h in self.hyperplanes],
        }


def build_forcing_contract(X: ChoiceFunction, payments: ArrayLike, Ts: TypeSpace, c: CostModel) -> ScreeningResultsContract:
    """Implement an IC methods-based contract with a type-contingent rule.

    ``H_theta`` interpolates ``c`` on the support of ``X(theta)`` (minimum-norm
    choice when the support is smaller than the state space).  The floor is
    ``min_theta min_p T(theta) - theta H_theta(p)``; the inner minimum of an
    affine function sits at a vertex, so it is exact.
    """
    T = np.asarray(payments, dtype=float)
    if not X.non_redundant:
        bad = [k for k, e in enumerate(X) if not e.non_redundant]
        raise RedundantSupport(f"supports of types {bad} are affinely dependent")
    mc = methods_contract(X, T, Ts, c)
    problems = mc.violations()
    if problems:
        raise NotIncentiveCompatible(f"methods-based contract violates {problems[0]}")
    H = tuple(affine_from_graph(S, np.asarray(c(S), dtype=float)) for S in X.supports)
    V = vertices(X.dim)
    floor = min(float(np.min(T[k] - Ts.thetas[k] * H[k](V))) for k in range(len(X)))
    return ScreeningResultsContract(Ts.thetas, tuple(X.supports), T.copy(), floor, H)


# --------------------------------------------------------------------------
# Single results-based contract t*
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultsContract:
    """Payment ``t(p)``: listed amounts on finitely many beliefs, ``default`` elsewhere."""

    beliefs: NDArray[np.float64]
    amounts: NDArray[np.float64]
    default: float
    owners: tuple[int, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        B = as_points(self.beliefs).copy()
        a = np.array(self.amounts, dtype=float).ravel()
        if B.shape[0] != a.size:
            raise ValueError("one payment per listed belief is required")
        for i in range(B.shape[0]):
            for j in range(i):
                if np.max(np.abs(B[i] - B[j])) < BELIEF_TOL:
                    raise OverlappingSupports(f"payment beliefs {j} and {i} coincide")
        B.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "beliefs", B)
        object.__setattr__(self, "amounts", a)
        object.__setattr__(self, "default", float(self.default))
        object.__setattr__(self, "owners", tuple(int(o) for o in self.owners))

    @property
    def dim(self) -> int:
        return self.beliefs.shape[1]

    def lookup(self, P: ArrayLike) -> NDArray[np.intp]:
        """Index into ``beliefs`` for each row of ``P``, ``-1`` when unlisted."""
        Q = as_points(P)
        if self.beliefs.shape[0] == 0:
            return np.full(Q.shape[0], -1, dtype=np.intp)
        d = np.max(np.abs(Q[:, None, :] - self.beliefs[None, :, :]), axis=2)
        idx = np.argmin(d, axis=1)
        return np.where(d[np.arange(Q.shape[0]), idx] < BELIEF_TOL, idx, -1)

    def __call__(self, p: ArrayLike) -> float | NDArray[np.float64]:
        idx = self.lookup(p)
        listed = self.amounts[np.maximum(idx, 0)] if self.amounts.size else np.zeros(idx.size)
        out = np.where(idx >= 0, listed, self.default)
        return float(out[0]) if np.ndim(p) == 1 else out

    def with_default(self, default: float) -> ResultsContract:
        return ResultsContract(self.beliefs, self.amounts, default, self.owners, dict(self.meta))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "results",
            "beliefs": self.beliefs.tolist(),
            "amounts": self.amounts.tolist(),
            "default": self.default,
            "owners": list(self.owners),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ResultsContract:
        return cls(
            np.asarray(data["beliefs"], dtype=float),
            np.asarray(data["amounts"], dtype=float),
            float(data["default"]),
            tuple(data.get("owners", ())),
            dict(data.get("meta", {})),
        )


def expected_payment(t: ResultsContract, tau: Experiment) -> float:
    return float(tau.probs @ np.atleast_1d(t(tau.support)))


def rent_functionals(H: list[AffineFunctional], thetas: NDArray) -> list[AffineFunctional]:
    """``s_1 = 0`` and ``s_j = sum_{k<j} (theta_k - theta_{k+1}) H_k``."""
    s = [AffineFunctional.zero(H[0].dim)]
    for k in range(len(H) - 1):
        s.append(s[-1] + H[k] * (thetas[k] - thetas[k + 1]))
    return s


def floor_bound(s: list[AffineFunctional], thetas: NDArray, c: CostModel, *, resolution: int | None = None) -> float:
    """``min_k min_q s_k(q) + theta_k c(q)``, each inner problem being convex."""
    best = np.inf
    for k, sk in enumerate(s):
        th = float(thetas[k])
        _, val = minimize_on_simplex(lambda P, sk=sk, th=th: sk(P) + th * np.asarray(c(P), dtype=float), sk.dim, resolution=resolution)
        best = min(best, val)
    return float(best)


def build_results_contract(
    X: ChoiceFunction,
    payments: ArrayLike,
    Ts: TypeSpace,
    c: CostModel,
    floor_margin: float | None = None,
    *,
    resolution: int | None = None,
) -> ResultsContract:
    """Single payment rule ``t*`` implementing ``T*`` for a strongly c-monotone ``X``.

    On ``S_i`` the rule pays ``theta_i c(p) + s_i(p)``; every other belief is
    paid the default ``t_`` equal to the convex minimum of
    ``s_k + theta_k c`` over types and the simplex, less ``floor_margin``
    (``1e-6`` times the largest listed payment magnitude, at least ``1e-6``).
    """
    T = np.asarray(payments, dtype=float)
    if not X.full_dimension:
        raise NotFullDimension(f"support sizes {X.support_sizes} on {X.dim} states")
    S = X.supports
    for i in range(len(S)):
        for j in range(i + 1, len(S)):
            d = np.max(np.abs(S[i][:, None, :] - S[j][None, :, :]), axis=2)
            if np.any(d < BELIEF_TOL):
                raise OverlappingSupports(f"supports of types {i + 1} and {j + 1} share a belief")
    verdict = check_strong_c_monotone(X, Ts, c)
    if not verdict.passed:
        raise NotStronglyCMonotone("choice function is not strongly c-monotone", verdict.witness)

    th = Ts.thetas
    H = interpolants(X, c)
    s = rent_functionals(H, th)
    beliefs, amounts, owners = [], [], []
    for i, Si in enumerate(S):
        beliefs.append(Si)
        amounts.append(th[i] * np.asarray(c(Si), dtype=float) + s[i](Si))
        owners += [i] * Si.shape[0]
    amounts_all = np.concatenate(amounts)
    if floor_margin is None:
        floor_margin = FLOOR_MARGIN * max(1.0, float(np.max(np.abs(amounts_all))))
    bound = floor_bound(s, th, c, resolution=resolution)
    t = ResultsContract(
        np.vstack(beliefs),
        amounts_all,
        bound - floor_margin,
        tuple(owners),
        {"floor_bound": bound, "floor_margin": float(floor_margin)},
    )
    for k, e in enumerate(X):
        paid = expected_payment(t, e)
        if abs(paid - T[k]) > PAYMENT_TOL * (1.0 + abs(T[k])):
            raise PaymentMismatch(f"type {k + 1}: contract pays {paid!r} in expectation, target {T[k]!r}")
    return t
