"""Exact Newtonian capacity of finite subsets of Z^3.

The equilibrium measure of a finite set A solves the last-exit linear system

    sum_{y in A} G(x - y) esc(y) = 1   for every x in A,

where esc(y) = P^y(T_A = infinity) is the escape probability and the
capacity is Cap(A) = sum esc.  The Green matrix is symmetric positive
definite, so the solve is a dense Cholesky factorization.

Capacities are set-valued: multiplicities never change Cap.  Only the
sandwich and union bounds honor multiplicities, matching the statements
they implement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import lattice
from .errors import DomainError, NumericError, ResourceError
from .green import FAR_FIELD_COEFF, GreenTable, default_table

DENSE_SOLVE_BUDGET = 4000


@dataclass(frozen=True)
class PointSet:
    """Distinct lattice points with multiplicities (rows sorted by packed key)."""

    points: np.ndarray  # (n, 3) int64, distinct, lexicographically sorted
    counts: np.ndarray  # (n,) int64 multiplicities >= 1

    @property
    def size(self) -> int:
        """Number of distinct points."""
        return len(self.points)

    @property
    def total(self) -> int:
        """Multiset cardinality (multiplicities counted)."""
        return int(self.counts.sum())

    def index(self) -> dict[tuple[int, int, int], int]:
        return {tuple(p): i for i, p in enumerate(self.points.tolist())}

    def contains(self, x) -> bool:
        key = lattice.pack(lattice.as_points(x))[0]
        keys = lattice.pack(self.points)
        pos = np.searchsorted(keys, key)
        return pos < len(keys) and keys[pos] == key


def point_set(points, counts=None) -> PointSet:
    """Build a PointSet, merging duplicate rows (multiplicities add)."""
    pts = lattice.as_points(points)
    if pts.shape[0] == 0:
        return PointSet(points=pts.reshape(0, 3), counts=np.zeros(0, dtype=np.int64))
    keys = lattice.pack(pts)
    if counts is None:
        mult = np.ones(len(pts), dtype=np.int64)
    else:
        mult = np.asarray(counts, dtype=np.int64)
        if mult.shape != (len(pts),) or (mult < 1).any():
            raise DomainError("counts must be positive, one per point")
    uniq, inverse = np.unique(keys, return_inverse=True)
    summed = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(summed, inverse, mult)
    return PointSet(points=lattice.unpack(uniq), counts=summed)


def _gram(pts_a: np.ndarray, pts_b: np.ndarray, table: GreenTable, block: int = 512) -> np.ndarray:
    """Matrix of G(a_i - b_j), built in row blocks to bound peak memory."""
    out = np.empty((len(pts_a), len(pts_b)), dtype=np.float64)
    for lo in range(0, len(pts_a), block):
        hi = min(lo + block, len(pts_a))
        diffs = pts_a[lo:hi, None, :] - pts_b[None, :, :]
        out[lo:hi] = table.at(diffs)
    return out


@dataclass(frozen=True)
class EquilibriumMeasure:
    set: PointSet
    esc: np.ndarray        # escape probability per distinct point
    cap: float
    solver_residual: float


def equilibrium_measure(
    A: PointSet,
    table: GreenTable | None = None,
    max_points: int = DENSE_SOLVE_BUDGET,
) -> EquilibriumMeasure:
    """Solve the equilibrium system for a nonempty set of distinct points."""
    if A.size == 0:
        raise DomainError("equilibrium measure needs a nonempty set")
    if A.size > max_points:
        raise ResourceError(
            f"set has {A.size} points, above the dense-solve budget {max_points}"
        )
    table = table or default_table()
    gram = _gram(A.points, A.points, table)
    ones = np.ones(A.size)
    try:
        factor = cho_factor(gram, lower=False, check_finite=False)
        esc = cho_solve(factor, ones, check_finite=False)
    except np.linalg.LinAlgError as exc:  # PD kernel: occurrence signals a bug
        raise NumericError(f"Green matrix factorization failed: {exc}") from exc
    residual = float(np.max(np.abs(gram @ esc - 1.0)))
    if residual > 1e-12:  # one step of iterative refinement
        esc = esc + cho_solve(factor, ones - gram @ esc, check_finite=False)
        residual = float(np.max(np.abs(gram @ esc - 1.0)))
    if residual > 1e-8:
        raise NumericError(
            f"equilibrium solve residual {residual:.3e} too large", payload=residual
        )
    if esc.min() < -1e-9 or esc.max() > 1.0 + 1e-9:
        raise NumericError("escape probabilities left [0, 1]", payload=esc)
    esc = np.clip(esc, 0.0, 1.0)
    return EquilibriumMeasure(set=A, esc=esc, cap=float(esc.sum()), solver_residual=residual)


def capacity_exact(A: PointSet, table: GreenTable | None = None, max_points: int = DENSE_SOLVE_BUDGET) -> float:
    """Cap(A) = sum of escape probabilities; Cap(empty) = 0."""
    if A.size == 0:
        return 0.0
    return equilibrium_measure(A, table, max_points).cap


def escape_probability(x, A: PointSet, table: GreenTable | None = None) -> float:
    """P^x(T_A = infinity) for x outside A; the empty set is never hit."""
    if A.size == 0:
        return 1.0
    pt = lattice.as_points(x)
    if A.contains(pt[0]):
        raise DomainError("x lies in A; read esc from the equilibrium measure instead")
    table = table or default_table()
    measure = equilibrium_measure(A, table)
    hit = float(_gram(pt, A.points, table)[0] @ measure.esc)
    return float(min(1.0, max(0.0, 1.0 - hit)))


def capacity_bounds(A: PointSet, table: GreenTable | None = None) -> tuple[float, float]:
    """Sandwich bounds |X| / max row-sum <= Cap <= |X| / min row-sum.

    Multiplicities are counted on both sides, matching the multiset statement.
    """
    if A.size == 0:
        raise DomainError("capacity bounds need a nonempty set")
    table = table or default_table()
    gram = _gram(A.points, A.points, table)
    row_sums = gram @ A.counts.astype(np.float64)
    total = float(A.total)
    return total / float(row_sums.max()), total / float(row_sums.min())


def union_capacity_upper(X: PointSet, Y: PointSet, table: GreenTable | None = None) -> float:
    """Upper bound Cap(X u Y) <= Cap(X) + |X u Y| / min_{y in Y} sum_z G(z - y).

    The union is taken as a multiset (counts add); Cap(X) is the exact
    set-capacity of X's distinct points.
    """
    if X.size == 0 or Y.size == 0:
        raise DomainError("union bound needs nonempty X and Y")
    table = table or default_table()
    union = point_set(
        np.concatenate([X.points, Y.points]),
        np.concatenate([X.counts, Y.counts]),
    )
    gram = _gram(Y.points, union.points, table)
    row_sums = gram @ union.counts.astype(np.float64)
    return capacity_exact(X, table) + union.total / float(row_sums.min())


def incremental_capacity(A: PointSet, B: PointSet, table: GreenTable | None = None) -> float:
    """sum_{x in B} P^x(T_A = inf) P^x(T_{A u B} = inf) for disjoint A, B.

    Equals Cap(A u B) - Cap(A) exactly; the identity is the basis of the
    randomized identity suite.
    """
    if B.size == 0:
        return 0.0
    if A.size == 0:
        return capacity_exact(B, table)
    keys_a = lattice.pack(A.points)
    keys_b = lattice.pack(B.points)
    if np.intersect1d(keys_a, keys_b).size:
        raise DomainError("A and B must be disjoint")
    table = table or default_table()
    measure_a = equilibrium_measure(A, table)
    union = point_set(np.concatenate([A.points, B.points]))
    measure_u = equilibrium_measure(union, table)
    esc_a_at_b = 1.0 - _gram(B.points, A.points, table) @ measure_a.esc
    union_index = union.index()
    esc_u_at_b = np.array([measure_u.esc[union_index[tuple(p)]] for p in B.points.tolist()])
    return float(np.sum(esc_a_at_b * esc_u_at_b))


# ---------------------------------------------------------------------------
# balls
# ---------------------------------------------------------------------------

def ball_points(r: float) -> PointSet:
    """All lattice points with Euclidean norm <= r."""
    if r < 0:
        raise DomainError("radius must be >= 0")
    if r > 60:
        raise ResourceError(f"ball radius {r} exceeds the enumeration budget (60)")
    m = int(np.floor(r))
    rng = np.arange(-m, m + 1)
    X, Y, Z = np.meshgrid(rng, rng, rng, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    keep = np.sum(pts.astype(np.float64) ** 2, axis=1) <= r * r + 1e-9
    return point_set(pts[keep])


@dataclass(frozen=True)
class BallCapacity:
    value: float
    mode: str  # "exact" | "asymptotic"


#: Cap(B_r) ~ (2 pi / 3) r: the capacity normalization of the 3/(2 pi r) far field.
BALL_CAPACITY_SLOPE = 1.0 / FAR_FIELD_COEFF


def ball_capacity(
    r: float,
    table: GreenTable | None = None,
    max_points: int = 7500,
) -> BallCapacity:
    """Cap(B_r): exact solve within budget, else the (2 pi / 3) r asymptote."""
    if r < 0:
        raise DomainError("radius must be >= 0")
    if r <= 60:
        pts = ball_points(r)
        if pts.size <= max_points:
            return BallCapacity(
                value=capacity_exact(pts, table, max_points=max_points), mode="exact"
            )
    return BallCapacity(value=BALL_CAPACITY_SLOPE * r, mode="asymptotic")
