"""Ordering conditions on experiment choice functions.

Every check returns a :class:`Verdict`; failing verdicts carry a witness
naming the violating posterior or pair together with both sides of the
violated inequality.  Inequalities use a one-sided slack of
``1e-9 * (1 + |rhs|)``, so boundary cases count as satisfied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateSupport, NotFullDimension
from .geometry import AffineFunctional, affine_from_graph, in_convex_hull, match_belief
from .model import ChoiceFunction, CostModel, TypeSpace

SLACK = 1e-9

MORE_INFORMATIVE = "more-informative"
LESS_INFORMATIVE = "less-informative"
INCOMPARABLE = "incomparable"

C_MONOTONE = "c-monotone"
BLACKWELL = "blackwell-monotone"
STRONG_C = "strong-c-monotone"
CONDITION_N = "condition-n"
CONDITION_NADJ = "condition-nadj"
SYMMETRIC = "symmetric"
CONDITION_COMP = "condition-comp"
CONDITIONS = (C_MONOTONE, BLACKWELL, STRONG_C, CONDITION_N, CONDITION_NADJ, SYMMETRIC, CONDITION_COMP)


def _slack(rhs: float) -> float:
    return SLACK * (1.0 + abs(rhs))


def _plain(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


@dataclass(frozen=True)
class Verdict:
    """Outcome of one ordering check.

    ``passed`` is ``None`` when the condition is not applicable to the input
    (for instance strong c-monotonicity without full dimension).
    """

    name: str
    passed: bool | None
    witness: dict[str, Any] | None = None
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "witness": _plain(self.witness), "detail": _plain(self.detail)}


def interpolants(X: ChoiceFunction, c: CostModel) -> list[AffineFunctional]:
    """``H_k``: the affine functional through ``(p, c(p))`` for ``p`` in ``S_k``."""
    if not X.full_dimension:
        raise NotFullDimension(f"support sizes {X.support_sizes} on {X.dim} states")
    return [affine_from_graph(S, np.asarray(c(S), dtype=float)) for S in X.supports]


def weighted_interpolant(H: list[AffineFunctional], thetas: NDArray, i: int, j: int) -> AffineFunctional:
    """``sum_{k=i}^{j-1} (theta_k - theta_{k+1}) / (theta_i - theta_j) * H_k`` for ``i < j``."""
    total = AffineFunctional.zero(H[0].dim)
    span = thetas[i] - thetas[j]
    for k in range(i, j):
        total = total + H[k] * ((thetas[k] - thetas[k + 1]) / span)
    return total


# --------------------------------------------------------------------------
# c-monotonicity and Blackwell monotonicity
# --------------------------------------------------------------------------


def check_c_monotone(X: ChoiceFunction, c: CostModel) -> Verdict:
    costs = X.costs(c)
    for k in range(len(costs) - 1):
        if costs[k + 1] < costs[k] - _slack(costs[k]):
            witness = {
                "pair": (k, k + 1),
                "inequality": f"C(X(theta_{k + 2})) >= C(X(theta_{k + 1}))",
                "lhs": float(costs[k + 1]),
                "rhs": float(costs[k]),
            }
            return Verdict(C_MONOTONE, False, witness, {"costs": costs})
    return Verdict(C_MONOTONE, True, None, {"costs": costs})


def _contained(inner: NDArray, outer: NDArray) -> list[dict[str, Any]]:
    """Points of ``inner`` outside ``conv(outer)``, each with its separating certificate."""
    outside = []
    for idx, p in enumerate(inner):
        v = in_convex_hull(outer, p)
        if not v.member:
            outside.append({
                "index": idx,
                "belief": p,
                "distance": v.distance,
                "separator": v.separator.coefficients,
                "margin": v.margin,
            })
    return outside


def check_blackwell_monotone(X: ChoiceFunction) -> Verdict:
    """Support-hull test of the Blackwell order for every pair of types.

    ``detail["matrix"][i][j]`` describes ``X(theta_j)`` relative to
    ``X(theta_i)``.  Containment of ``S_i`` in ``conv(S_j)`` is necessary for
    ``X(theta_j)`` to be a mean-preserving spread of ``X(theta_i)``, and
    sufficient when ``S_j`` is affinely independent; otherwise the pass is
    flagged ``partial``.
    """
    n = len(X)
    S = X.supports
    matrix = [["equal" if i == j else INCOMPARABLE for j in range(n)] for i in range(n)]
    outside: dict[tuple[int, int], list[dict[str, Any]]] = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                outside[(i, j)] = _contained(S[i], S[j])
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if not outside[(i, j)]:
                matrix[i][j] = MORE_INFORMATIVE
            elif not outside[(j, i)]:
                matrix[i][j] = LESS_INFORMATIVE
    partial = not all(X[j].non_redundant for j in range(1, n))
    detail: dict[str, Any] = {"matrix": matrix, "partial": partial}
    for i in range(n):
        for j in range(i + 1, n):
            if outside[(i, j)]:
                witness = {
                    "pair": (i, j),
                    "relation": matrix[i][j],
                    "inequality": f"supp X(theta_{i + 1}) within conv(supp X(theta_{j + 1}))",
                    "outside": outside[(i, j)],
                }
                return Verdict(BLACKWELL, False, witness, detail)
    return Verdict(BLACKWELL, True, None, detail)


# --------------------------------------------------------------------------
# Strong c-monotonicity and its sufficient / necessary conditions
# --------------------------------------------------------------------------


def _compare(c_vals: NDArray, h_vals: NDArray, upper: bool) -> NDArray:
    """Signed violation of ``c <= h`` (``upper``) or ``c >= h``; positive means violated."""
    gaps = c_vals - h_vals if upper else h_vals - c_vals
    tol = SLACK * (1.0 + np.abs(h_vals))
    return np.where(gaps > tol, gaps, 0.0)


def _violations(S: NDArray, c: CostModel, h: AffineFunctional, upper: bool, label: dict[str, Any]) -> list[dict[str, Any]]:
    c_vals = np.asarray(c(S), dtype=float)
    h_vals = np.asarray(h(S), dtype=float)
    gaps = _compare(c_vals, h_vals, upper)
    out = []
    for idx in np.flatnonzero(gaps):
        out.append({
            **label,
            "index": int(idx),
            "belief": S[idx],
            "lhs": float(c_vals[idx]),
            "rhs": float(h_vals[idx]),
            "gap": float(gaps[idx]),
            "required": "c(p) <= H(p)" if upper else "c(p) >= H(p)",
            "observed": "c(p) > H(p)" if upper else "c(p) < H(p)",
        })
    return out


def _worst(name: str, found: list[dict[str, Any]], detail: dict[str, Any]) -> Verdict:
    if not found:
        return Verdict(name, True, None, detail)
    worst = max(found, key=lambda w: w["gap"])
    return Verdict(name, False, worst, {**detail, "violations": found})


def check_strong_c_monotone(X: ChoiceFunction, Ts: TypeSpace, c: CostModel) -> Verdict:
    """For ``i < j``: ``c <= G_ij`` on ``S_i`` and ``c >= G_ij`` on ``S_j``.

    ``G_ij`` is the type-gap weighted average of ``H_i .. H_{j-1}``.  The
    witness is the largest violation; its ``required`` field states which of
    the two inequalities fails.
    """
    H = interpolants(X, c)
    th = Ts.thetas
    found: list[dict[str, Any]] = []
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            G = weighted_interpolant(H, th, i, j)
            found += _violations(X[i].support, c, G, True, {"pair": (i, j), "type": i, "side": f"S_{i + 1}"})
            found += _violations(X[j].support, c, G, False, {"pair": (i, j), "type": j, "side": f"S_{j + 1}"})
    return _worst(STRONG_C, found, {})


def _condition(name: str, X: ChoiceFunction, c: CostModel, adjacent: bool) -> Verdict:
    H = interpolants(X, c)
    n = len(X)
    found: list[dict[str, Any]] = []
    for k in range(n - 1):
        lower = [k - 1] if adjacent else list(range(k))
        upper = [k + 1] if adjacent else list(range(k + 1, n))
        for i in lower:
            if i >= 0:
                found += _violations(X[i].support, c, H[k], True, {"k": k, "type": i, "side": f"S_{i + 1}"})
        for i in upper:
            found += _violations(X[i].support, c, H[k], False, {"k": k, "type": i, "side": f"S_{i + 1}"})
    return _worst(name, found, {})


def check_condition_n(X: ChoiceFunction, c: CostModel) -> Verdict:
    """Sufficient condition: every lower support in ``D_k``, every higher one in ``U_k``."""
    return _condition(CONDITION_N, X, c, adjacent=False)


def check_condition_nadj(X: ChoiceFunction, c: CostModel) -> Verdict:
    """Necessary condition: the same nesting for adjacent supports only."""
    return _condition(CONDITION_NADJ, X, c, adjacent=True)


def check_symmetric(X: ChoiceFunction, c: CostModel, tol: float = 1e-9) -> Verdict:
    """Each experiment's support lies on one level set of ``c``."""
    levels, spreads = [], []
    for k, e in enumerate(X):
        vals = np.asarray(c(e.support), dtype=float)
        spreads.append(float(np.ptp(vals)))
        levels.append(float(vals.mean()))
    detail = {"levels": levels, "spreads": spreads, "tol": tol}
    for k, s in enumerate(spreads):
        if s > tol:
            vals = np.asarray(c(X[k].support), dtype=float)
            witness = {
                "type": k,
                "inequality": "max c - min c <= tol on the support",
                "lhs": s,
                "rhs": tol,
                "beliefs": (X[k].support[int(np.argmin(vals))], X[k].support[int(np.argmax(vals))]),
            }
            return Verdict(SYMMETRIC, False, witness, detail)
    return Verdict(SYMMETRIC, True, None, detail)


def check_comp(X: ChoiceFunction) -> Verdict:
    """Higher-type results inside ``conv(S_i)`` must be points of ``S_i``."""
    if not X.non_redundant:
        raise DegenerateSupport("condition (comp) needs affinely independent supports")
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            for idx, p in enumerate(X[j].support):
                if match_belief(X[i].support, p) is not None:
                    continue
                v = in_convex_hull(X[i].support, p)
                if v.member:
                    witness = {
                        "pair": (i, j),
                        "index": idx,
                        "belief": p,
                        "inequality": f"points of S_{j + 1} in conv(S_{i + 1}) are points of S_{i + 1}",
                        "hull_weights": v.weights,
                    }
                    return Verdict(CONDITION_COMP, False, witness)
    return Verdict(CONDITION_COMP, True)


# --------------------------------------------------------------------------
# Regions U_k / D_k
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionMembership:
    """Per ``k < N``: ``"U"`` if ``c > H_k``, ``"D"`` if ``c < H_k``, else ``"boundary"``."""

    belief: NDArray[np.float64]
    labels: tuple[str, ...]
    gaps: tuple[float, ...]

    def in_upper(self, k: int) -> bool:
        return self.labels[k] in ("U", "boundary")

    def in_lower(self, k: int) -> bool:
        return self.labels[k] in ("D", "boundary")


def region_membership(p: ArrayLike, X: ChoiceFunction, c: CostModel, tol: float = SLACK) -> RegionMembership:
    H = interpolants(X, c)
    x = np.asarray(p, dtype=float)
    cv = float(c(x))
    labels, gaps = [], []
    for k in range(len(X) - 1):
        gap = cv - float(H[k](x))
        gaps.append(gap)
        if abs(gap) <= tol * (1.0 + abs(cv)):
            labels.append("boundary")
        else:
            labels.append("U" if gap > 0 else "D")
    return RegionMembership(x, tuple(labels), tuple(gaps))


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotonicityReport:
    verdicts: dict[str, Verdict]
    n_types: int
    n_states: int

    def __getitem__(self, name: str) -> Verdict:
        return self.verdicts[name]

    def passed(self, name: str) -> bool | None:
        return self.verdicts[name].passed

    def implication_violations(self) -> list[str]:
        """Known implications between the conditions that this report contradicts."""
        v = {k: self.passed(k) for k in self.verdicts}
        broken = []

        def implies(a: bool | None, b: bool | None, text: str) -> None:
            if a is True and b is False:
                broken.append(text)

        implies(v[CONDITION_N], v[STRONG_C], "(n) => (sm)")
        implies(v[STRONG_C], v[CONDITION_NADJ], "(sm) => (nadj)")
        implies(v[STRONG_C], v[C_MONOTONE], "(sm) => c-monotone")
        sym_c = None if v[SYMMETRIC] is None or v[C_MONOTONE] is None else v[SYMMETRIC] and v[C_MONOTONE]
        implies(sym_c, v[STRONG_C], "symmetric and c-monotone => (sm)")
        if self.n_types == 2:
            implies(v[STRONG_C], v[CONDITION_COMP], "(sm) => (comp) for two types")
        return broken

    @property
    def consistent(self) -> bool:
        return not self.implication_violations()

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "implication_violations": self.implication_violations(),
        }


def monotonicity_report(X: ChoiceFunction, Ts: TypeSpace, c: CostModel, *, symmetric_tol: float = 1e-9) -> MonotonicityReport:
    """Run every check, marking conditions that need full dimension as not applicable."""
    verdicts = {
        C_MONOTONE: check_c_monotone(X, c),
        BLACKWELL: check_blackwell_monotone(X),
        SYMMETRIC: check_symmetric(X, c, symmetric_tol),
    }
    for name, fn in (
        (STRONG_C, lambda: check_strong_c_monotone(X, Ts, c)),
        (CONDITION_N, lambda: check_condition_n(X, c)),
        (CONDITION_NADJ, lambda: check_condition_nadj(X, c)),
    ):
        try:
            verdicts[name] = fn()
        except NotFullDimension as exc:
            verdicts[name] = Verdict(name, None, None, {"reason": str(exc)})
    try:
        verdicts[CONDITION_COMP] = check_comp(X)
    except DegenerateSupport as exc:
        verdicts[CONDITION_COMP] = Verdict(CONDITION_COMP, None, None, {"reason": str(exc)})
    return MonotonicityReport({k: verdicts[k] for k in CONDITIONS}, len(X), X.dim)
