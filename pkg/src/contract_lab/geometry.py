"""Affine geometry on the probability simplex.

Beliefs are plain 1-D float arrays whose entries are non-negative and sum to
one; point sets are 2-D arrays with one belief per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from .errors import DegenerateBasis, DimensionMismatch
from .lp_core import maximize

BELIEF_TOL = 1e-9
HULL_TOL = 1e-8
RANK_TOL = 1e-9

Belief = NDArray[np.float64]


def as_belief(weights: ArrayLike, *, tol: float = 1e-9) -> Belief:
    """Validate and normalize a probability vector.

    Tiny negative round-off (above ``-tol``) is clipped to zero; the result is
    renormalized so the entries sum to one and returned read-only.
    """
    p = np.array(weights, dtype=float).ravel()
    if p.size < 1 or not np.all(np.isfinite(p)):
        raise ValueError(f"not a probability vector: {weights!r}")
    if np.any(p < -tol):
        raise ValueError(f"negative probability in {p}")
    total = p.sum()
    if abs(total - 1.0) > max(tol, 1e-6):
        raise ValueError(f"probabilities sum to {total}, not 1")
    p = np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()
    p.setflags(write=False)
    return p


def as_points(points: ArrayLike) -> NDArray[np.float64]:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.ndim != 2:
        raise DimensionMismatch("point set must be a 2-D array")
    return P


def same_belief(p: ArrayLike, q: ArrayLike, tol: float = BELIEF_TOL) -> bool:
    return bool(np.max(np.abs(np.asarray(p) - np.asarray(q))) < tol)


def match_belief(points: ArrayLike, p: ArrayLike, tol: float = BELIEF_TOL) -> int | None:
    """Index of the row of ``points`` equal to ``p`` in max-norm, else ``None``."""
    P = as_points(points)
    if P.shape[0] == 0:
        return None
    d = np.max(np.abs(P - np.asarray(p)), axis=1)
    i = int(np.argmin(d))
    return i if d[i] < tol else None


@dataclass(frozen=True)
class AffineFunctional:
    """Affine map on the simplex, ``p -> coefficients @ p``.

    Because beliefs sum to one, a constant ``h`` is represented by the
    coefficient vector ``h * ones``.
    """

    coefficients: NDArray[np.float64]

    def __post_init__(self) -> None:
        a = np.array(self.coefficients, dtype=float).ravel()
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @classmethod
    def constant(cls, value: float, dim: int) -> AffineFunctional:
        return cls(np.full(dim, float(value)))

    @classmethod
    def zero(cls, dim: int) -> AffineFunctional:
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.coefficients.size

    def __call__(self, p: ArrayLike) -> float | NDArray[np.float64]:
        x = np.asarray(p, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"belief of length {x.shape[-1]} for functional on {self.dim} states")
        out = x @ self.coefficients
        return float(out) if np.ndim(out) == 0 else out

    def __add__(self, other: AffineFunctional) -> AffineFunctional:
        return AffineFunctional(self.coefficients + other.coefficients)

    def __sub__(self, other: AffineFunctional) -> AffineFunctional:
        return AffineFunctional(self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> AffineFunctional:
        return AffineFunctional(self.coefficients * float(scalar))

    __rmul__ = __mul__

    def max_over_simplex(self) -> float:
        return float(self.coefficients.max())

    def min_over_simplex(self) -> float:
        return float(self.coefficients.min())


def affine_rank(points: ArrayLike, tol: float = RANK_TOL) -> int:
    """Affine rank of a point set: rank of its difference matrix."""
    P = as_points(points)
    if P.shape[0] <= 1:
        return 0
    D = P[1:] - P[0]
    s = np.linalg.svd(D, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def is_affinely_independent(points: ArrayLike, tol: float = RANK_TOL) -> bool:
    P = as_points(points)
    if P.shape[0] > P.shape[1]:
        return False
    return affine_rank(P, tol) == P.shape[0] - 1


def barycentric_coords(basis: ArrayLike, p: ArrayLike) -> NDArray[np.float64]:
    """Affine weights ``alpha`` with ``sum(alpha) == 1`` and ``alpha @ basis == p``.

    ``basis`` must hold exactly ``len(p)`` affinely independent beliefs; the
    weights may be negative when ``p`` lies outside their convex hull.
    """
    S = as_points(basis)
    x = np.asarray(p, dtype=float)
    if S.shape[1] != x.size:
        raise DimensionMismatch(f"basis lives on {S.shape[1]} states, belief on {x.size}")
    if S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"need {S.shape[1]} basis points, got {S.shape[0]}")
    if not is_affinely_independent(S):
        raise DegenerateBasis("basis points are affinely dependent")
    D = (S[1:] - S[0]).T
    beta, *_ = np.linalg.lstsq(D, x - S[0], rcond=None)
    return np.concatenate([[1.0 - beta.sum()], beta])


def affine_from_graph(points: ArrayLike, values: ArrayLike) -> AffineFunctional:
    """Affine functional through the anchors ``(points[i], values[i])``.

    With fewer anchors than states the interpolant is not unique and the
    minimum-norm coefficient vector is returned.
    """
    P = as_points(points)
    v = np.asarray(values, dtype=float).ravel()
    if v.size != P.shape[0]:
        raise DimensionMismatch("one value per anchor point is required")
    if P.shape[0] > P.shape[1] or not is_affinely_independent(P):
        raise DegenerateBasis("anchor beliefs are affinely dependent")
    if P.shape[0] == P.shape[1]:
        coef = np.linalg.solve(P, v)
    else:
        coef, *_ = np.linalg.lstsq(P, v, rcond=None)
    return AffineFunctional(coef)


@dataclass(frozen=True)
class HullVerdict:
    """Outcome of a convex-hull membership test.

    Members carry convex ``weights``; non-members carry a ``separator`` whose
    value at the query exceeds its value at every point by at least ``margin``.
    """

    member: bool
    distance: float
    weights: NDArray[np.float64] | None = None
    separator: AffineFunctional | None = None
    margin: float = 0.0


def in_convex_hull(points: ArrayLike, p: ArrayLike, tol: float = HULL_TOL) -> HullVerdict:
    """Decide ``p in conv(points)`` by the L1-distance LP.

    The LP ``min |e+| + |e-|`` s.t. ``points.T w + e+ - e- = p``, ``sum w = 1``
    is always feasible; its dual yields a separating functional with
    coefficients bounded by one whenever the distance exceeds ``tol``.
    """
    P = as_points(points)
    x = np.asarray(p, dtype=float).ravel()
    m, n = P.shape
    if m == 0:
        raise ValueError("point set is empty")
    if n != x.size:
        raise DimensionMismatch(f"points live on {n} states, query on {x.size}")
    I = np.eye(n)
    A = np.vstack([
        np.hstack([P.T, I, -I]),
        np.concatenate([np.ones(m), np.zeros(2 * n)]),
    ])
    b = np.concatenate([x, [1.0]])
    c = np.concatenate([np.zeros(m), -np.ones(2 * n)])
    sol = maximize(c, A, b)
    distance = -sol.objective_value
    if distance <= tol:
        return HullVerdict(True, distance, weights=sol.x[:m].copy())
    y = -sol.dual
    # h(q) = a.q + a0 on the simplex has coefficients a + a0.
    separator = AffineFunctional(y[:n] + y[n])
    margin = float(separator(x) - np.max(separator(P)))
    return HullVerdict(False, distance, separator=separator, margin=margin)


@lru_cache(maxsize=32)
def _grid_counts(dim: int, resolution: int) -> NDArray[np.int64]:
    rows = []
    for bars in combinations(range(resolution + dim - 1), dim - 1):
        edges = (-1, *bars, resolution + dim - 1)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(dim)])
    counts = np.array(rows[::-1], dtype=np.int64).reshape(-1, dim)
    counts.setflags(write=False)
    return counts


def simplex_grid(dim: int, resolution: int) -> NDArray[np.float64]:
    """All beliefs on ``dim`` states whose entries are multiples of ``1/resolution``.

    Rows come in descending lexicographic order, starting at the first vertex.
    """
    if dim < 2 or resolution < 1:
        raise ValueError("simplex_grid needs dim >= 2 and resolution >= 1")
    return _grid_counts(dim, resolution) / float(resolution)


def local_grid(center: ArrayLike, resolution: int, radius: int) -> NDArray[np.float64]:
    """Lattice beliefs of step ``1/resolution`` within ``radius`` steps of ``center``.

    Used for refinement around a point without enumerating the full fine grid.
    """
    x = np.asarray(center, dtype=float)
    dim = x.size
    base = np.rint(x[:-1] * resolution).astype(np.int64)
    offsets = np.arange(-radius, radius + 1)
    mesh = np.stack(np.meshgrid(*([offsets] * (dim - 1)), indexing="ij"), axis=-1).reshape(-1, dim - 1)
    head = base + mesh
    last = resolution - head.sum(axis=1, keepdims=True)
    counts = np.hstack([head, last])
    ok = np.all(counts >= 0, axis=1)
    return counts[ok] / float(resolution)


def vertices(dim: int) -> NDArray[np.float64]:
    return np.eye(dim)


def unique_beliefs(points: ArrayLike, tol: float = BELIEF_TOL) -> NDArray[np.float64]:
    """Drop rows that repeat an earlier row within ``tol`` (first occurrence kept)."""
    P = as_points(points)
    if P.shape[0] == 0:
        return P
    keys = np.round(P / tol).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return P[np.sort(first)]


def stack_beliefs(parts: Sequence[ArrayLike]) -> NDArray[np.float64]:
    arrays = [as_points(x) for x in parts if np.size(x)]
    return np.vstack(arrays) if arrays else np.zeros((0, 0))


def default_scan_resolution(dim: int) -> int:
    """Grid resolution used for whole-simplex scans; 256 per edge up to three states."""
    return {2: 256, 3: 256, 4: 64}.get(dim, 16)


def minimize_on_simplex(
    fn: Callable[[NDArray[np.float64]], Any],
    dim: int,
    *,
    resolution: int | None = None,
    levels: int = 2,
    polish: bool = True,
) -> tuple[NDArray[np.float64], float]:
    """Approximate ``min fn`` over the simplex for a convex, row-vectorized ``fn``.

    The grid minimum (vertices included) is refined ``levels`` times on
    lattices eight times finer around the incumbent, then polished by a
    local SLSQP run.  The returned value is always one that ``fn`` actually
    attains, so it bounds the true minimum from above.
    """
    res = resolution or default_scan_resolution(dim)
    P = simplex_grid(dim, res)
    vals = np.asarray(fn(P), dtype=float).reshape(-1)
    i = int(np.argmin(vals))
    best, best_val = P[i].copy(), float(vals[i])
    fine = res
    for _ in range(levels):
        fine *= 8
        local = local_grid(best, fine, 8)
        lv = np.asarray(fn(local), dtype=float).reshape(-1)
        j = int(np.argmin(lv))
        if lv[j] < best_val:
            best, best_val = local[j].copy(), float(lv[j])
    if polish:
        out = minimize(
            lambda y: float(np.asarray(fn(np.clip(y, 0.0, None)[None, :] / np.clip(y, 0.0, None).sum())).ravel()[0]),
            best,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * dim,
            constraints=({"type": "eq", "fun": lambda y: y.sum() - 1.0},),
            options={"ftol": 1e-15, "maxiter": 200},
        )
        y = np.clip(out.x, 0.0, None)
        if y.sum() > 0:
            y = y / y.sum()
            v = float(np.asarray(fn(y[None, :])).ravel()[0])
            if v < best_val:
                best, best_val = y, v
    return best, best_val
