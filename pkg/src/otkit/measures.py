"""Weighted point sets, kernel/cost matrices, and transport plans.

These are the data types shared by every solver in the package.  A
:class:`DiscreteMeasure` is a finite weighted point set; the two matrix
kinds are the pairwise inner-product matrix (consumed by the semi-discrete
solver) and the squared-Euclidean cost matrix (consumed by the entropic and
exact solvers and by cost evaluation).  A :class:`TransportPlan` is a dense
nonnegative matrix of moved mass.

All types are immutable after construction and every operation here is a
pure function, so they are safe to share across threads.
"""

from dataclasses import dataclass

import numpy as np

INNER_PRODUCT = "inner_product"
SQUARED_EUCLIDEAN = "squared_euclidean_cost"

# Source/target totals differing by more than this are rejected instead of
# silently renormalized; callers must use normalize() explicitly.
MASS_MATCH_TOL = 1e-6

# Tolerance for marginal checks on exact (non-entropic) plans.
MARGINAL_TOL = 1e-9


def check_points(points) -> np.ndarray:
    """Coerce to a read-only (n, d) float64 array and validate it.

    Points are stored row-major, one row per point, so inner loops can
    stream over a single contiguous buffer.
    """
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"points must be a 2-d array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"need at least one point of dimension >= 1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("points contain non-finite values")
    arr.setflags(write=False)
    return arr


def check_masses(masses, n: int | None = None) -> np.ndarray:
    """Coerce to a read-only (n,) float64 mass vector and validate it."""
    arr = np.ascontiguousarray(masses, dtype=np.float64).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"expected {n} masses, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError("masses contain non-finite values")
    if (arr < 0).any():
        raise ValueError("masses must be nonnegative")
    if not (arr > 0).any():
        raise ValueError("at least one mass must be positive")
    arr.setflags(write=False)
    return arr


def check_heights(h, n_t: int) -> np.ndarray:
    """Validate a hyperplane-intercept vector: finite, length n_t."""
    arr = np.ascontiguousarray(h, dtype=np.float64).reshape(-1)
    if arr.shape[0] != n_t:
        raise ValueError(f"expected {n_t} heights, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError("heights contain non-finite values")
    return arr


def check_matched_totals(p_s: np.ndarray, p_t: np.ndarray, tol: float = MASS_MATCH_TOL) -> None:
    """Reject marginals whose totals differ by more than ``tol``."""
    gap = abs(float(p_s.sum()) - float(p_t.sum()))
    if gap > tol:
        raise ValueError(
            f"source and target totals differ by {gap:.3e} (> {tol:.1e}); "
            "normalize the measures explicitly first"
        )


@dataclass(frozen=True)
class DiscreteMeasure:
    """A weighted point set: n points in R^d with nonnegative masses.

    Parameters
    ----------
    points : array-like, shape (n, d)
        Support of the measure, one point per row.
    masses : array-like, shape (n,)
        Nonnegative mass per point; at least one must be positive.
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        points = check_points(self.points)
        masses = check_masses(self.masses, points.shape[0])
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


def normalize(measure: DiscreteMeasure) -> DiscreteMeasure:
    """Rescale masses to total 1; points are unchanged.

    Raises
    ------
    ValueError
        If the total mass is not strictly positive.
    """
    total = measure.total_mass
    if total <= 0:
        raise ValueError("cannot normalize a measure with zero total mass")
    return DiscreteMeasure(measure.points, measure.masses / total)


@dataclass(frozen=True)
class KernelMatrix:
    """A dense pairwise matrix over source x target points.

    ``kind`` distinguishes the inner-product matrix M_ij = <x_i, y_j> from
    the squared-Euclidean cost matrix C_ij = |x_i - y_j|^2.
    """

    entries: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in (INNER_PRODUCT, SQUARED_EUCLIDEAN):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError(f"kernel entries must be 2-d, got shape {entries.shape}")
        if not np.isfinite(entries).all():
            raise ValueError("kernel entries contain non-finite values")
        if self.kind == SQUARED_EUCLIDEAN and (entries < 0).any():
            raise ValueError("cost entries must be nonnegative")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def _check_same_dim(src: DiscreteMeasure, tgt: DiscreteMeasure) -> None:
    if src.dim != tgt.dim:
        raise ValueError(f"dimension mismatch: source is {src.dim}-d, target is {tgt.dim}-d")


def inner_product_matrix(src: DiscreteMeasure, tgt: DiscreteMeasure) -> KernelMatrix:
    """Pairwise inner products M_ij = <x^s_i, x^t_j>."""
    _check_same_dim(src, tgt)
    return KernelMatrix(src.points @ tgt.points.T, INNER_PRODUCT)


def cost_matrix(src: DiscreteMeasure, tgt: DiscreteMeasure) -> KernelMatrix:
    """Pairwise squared Euclidean costs C_ij = |x^s_i - x^t_j|^2.

    Computed from coordinate differences directly (not the expanded
    |x|^2 - 2<x,y> + |y|^2 identity), so entries are exactly nonnegative
    and zero iff the two points coincide.
    """
    _check_same_dim(src, tgt)
    diff = src.points[:, None, :] - tgt.points[None, :, :]
    return KernelMatrix(np.einsum("ijk,ijk->ij", diff, diff), SQUARED_EUCLIDEAN)


@dataclass(frozen=True)
class TransportPlan:
    """A dense n_s x n_t matrix of transported mass; entries >= 0."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError(f"plan entries must be 2-d, got shape {entries.shape}")
        if not np.isfinite(entries).all():
            raise ValueError("plan entries contain non-finite values")
        if (entries < 0).any():
            raise ValueError("plan entries must be nonnegative")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    @property
    def total_mass(self) -> float:
        return float(self.entries.sum())


def marginal_residuals(plan: TransportPlan, p_s: np.ndarray, p_t: np.ndarray) -> tuple[float, float]:
    """Max-norm violations of the row (source) and column (target) marginals."""
    row = float(np.abs(plan.row_sums() - p_s).max())
    col = float(np.abs(plan.col_sums() - p_t).max())
    return row, col


def plan_cost(plan: TransportPlan, costs: KernelMatrix) -> float:
    """Total transport cost sum_ij T_ij C_ij of a plan against a cost matrix."""
    if costs.kind != SQUARED_EUCLIDEAN:
        raise ValueError(f"plan_cost needs a {SQUARED_EUCLIDEAN} matrix, got {costs.kind!r}")
    if plan.shape != costs.shape:
        raise ValueError(f"shape mismatch: plan {plan.shape} vs costs {costs.shape}")
    return float(np.sum(plan.entries * costs.entries))
