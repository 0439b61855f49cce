"""Dense two-phase simplex method for small standard-form linear programs.

Solves ``maximize c.x  s.t.  A x = b, x >= 0`` and returns a basic optimal
solution together with the dual vector read off the final basis.  Bland's rule
is used for both the entering and leaving variable, so the pivot sequence is
fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, NumericalFailure

PIVOT_TOL = 1e-11
MAX_ITERATIONS = 1_000_000


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``maximize objective.x  s.t.  A_eq x = b_eq, x >= 0``."""

    objective: NDArray[np.float64]
    A_eq: NDArray[np.float64]
    b_eq: NDArray[np.float64]

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        b = np.asarray(self.b_eq, dtype=float).ravel()
        if A.shape != (b.size, c.size):
            raise DimensionMismatch(
                f"A_eq has shape {A.shape}, expected ({b.size}, {c.size})"
            )
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(A))):
            raise ValueError("constraint data must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "b_eq", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A_eq.shape


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: NDArray[np.float64]
    objective_value: float
    basis: tuple[int, ...] = ()
    dual: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    @property
    def support(self) -> NDArray[np.intp]:
        return np.flatnonzero(self.x > 0)


class _Basis:
    """Revised-simplex state: a basis list over the columns of ``A``.

    Every quantity is recomputed from the original data by small dense
    solves, so no round-off accumulates across pivots.
    """

    def __init__(self, A: NDArray, b: NDArray, basis: list[int]):
        self.A = A
        self.b = b
        self.basis = basis

    def _solve(self, rhs: NDArray, transpose: bool = False) -> NDArray:
        B = self.A[:, self.basis]
        try:
            return np.linalg.solve(B.T if transpose else B, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("basis matrix became singular") from exc

    def values(self) -> NDArray:
        x_b = self._solve(self.b)
        x_b[np.abs(x_b) < 1e-14] = 0.0
        return x_b

    def column(self, j: int) -> NDArray:
        return self._solve(self.A[:, j])

    def duals(self, c: NDArray) -> NDArray:
        return self._solve(c[self.basis], transpose=True)


def _run_simplex(
    state: _Basis, c: NDArray, allowed: NDArray[np.bool_], budget: int
) -> tuple[LpStatus, int]:
    """Bland-rule primal simplex maximizing ``c``; returns status and pivots used."""
    scale = 1.0 + float(np.max(np.abs(c))) if c.size else 1.0
    dj_tol = 1e-11 * scale
    iterations = 0
    while True:
        if iterations >= budget:
            raise NumericalFailure(f"simplex exceeded {MAX_ITERATIONS} pivots")
        y = state.duals(c)
        reduced = c - y @ state.A
        reduced[state.basis] = 0.0
        candidates = np.flatnonzero((reduced > dj_tol) & allowed)
        if candidates.size == 0:
            return LpStatus.OPTIMAL, iterations
        col = int(candidates[0])
        direction = state.column(col)
        rows = np.flatnonzero(direction > PIVOT_TOL)
        if rows.size == 0:
            return LpStatus.UNBOUNDED, iterations
        x_b = state.values()
        ratios = np.maximum(x_b[rows], 0.0) / direction[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        basic_ids = np.asarray(state.basis)[tied]
        row = int(tied[np.argmin(basic_ids)])
        state.basis[row] = col
        iterations += 1


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` with the two-phase simplex method.

    Optimal solutions are basic: at most ``rank(A_eq)`` strictly positive
    entries.  ``dual`` satisfies ``A_eq.T @ dual >= objective`` (up to pivot
    tolerance) and ``b_eq @ dual == objective_value`` at optimality.
    """
    A = lp.A_eq.copy()
    b = lp.b_eq.copy()
    c = lp.objective
    m, n = A.shape

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    if m == 0:
        if np.any(c > 0):
            return LpSolution(LpStatus.UNBOUNDED, np.zeros(n), np.inf)
        return LpSolution(LpStatus.OPTIMAL, np.zeros(n), 0.0, (), np.zeros(0))

    # Phase 1: artificial identity block, maximize -sum(artificials).
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), -np.ones(m)])
    state = _Basis(A1, b, list(range(n, n + m)))
    allowed = np.ones(n + m, dtype=bool)
    _, it1 = _run_simplex(state, c1, allowed, MAX_ITERATIONS)

    x_b = state.values()
    infeasibility = float(x_b[np.asarray(state.basis) >= n].sum())
    feas_tol = 1e-9 * (1.0 + float(np.abs(b).max()))
    if infeasibility > feas_tol:
        return LpSolution(LpStatus.INFEASIBLE, np.zeros(n), -np.inf, iterations=it1)

    # Drive zero-level artificials out of the basis; drop rows that are redundant.
    keep_rows = list(range(m))
    for row in range(m):
        if state.basis[row] < n:
            continue
        B_inv_row = np.linalg.solve(A1[:, state.basis].T, np.eye(m)[row])
        entries = np.abs(B_inv_row @ A)
        entries[[j for j in state.basis if j < n]] = 0.0
        nonbasic = np.flatnonzero(entries > 1e-9)
        if nonbasic.size:
            state.basis[row] = int(nonbasic[0])
        else:
            keep_rows.remove(row)

    basis = [state.basis[r] for r in keep_rows]
    state2 = _Basis(A[keep_rows], b[keep_rows], basis)
    status, it2 = _run_simplex(state2, c, np.ones(n, dtype=bool), MAX_ITERATIONS - it1)
    iterations = it1 + it2
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status, np.zeros(n), np.inf, iterations=iterations)

    x = np.zeros(n)
    x[state2.basis] = np.maximum(state2.values(), 0.0)
    y_kept = state2.duals(c)
    dual = np.zeros(m)
    dual[keep_rows] = y_kept
    dual[flip] *= -1.0
    return LpSolution(
        LpStatus.OPTIMAL,
        x,
        float(c @ x),
        tuple(sorted(state2.basis)),
        dual,
        iterations,
    )


def maximize(c: ArrayLike, A_eq: ArrayLike, b_eq: ArrayLike) -> LpSolution:
    """Convenience wrapper: build a :class:`LinearProgram` and solve it."""
    return solve_lp(LinearProgram(np.asarray(c), np.asarray(A_eq), np.asarray(b_eq)))
