"""Semi-discrete optimal transport by gradient descent on a piecewise-linear envelope.

The target measure induces one affine hyperplane per target point,
``<x, x^t_j> + h_j``; their upper envelope is a piecewise-linear convex
potential whose facets partition source space into cells.  Evaluating the
envelope only at the source samples gives, per source, a value and a *tie
set*: the targets whose hyperplanes attain the maximum (within a relative
tolerance).  Each source's mass is split uniformly over its tie set, which
yields approximate cell weights, a transport plan, and a convex energy in
the intercepts ``h`` whose gradient is ``cell_weights - target_masses``.
Driving that gradient to zero by (sub)gradient descent makes the cell
weights match the target masses, i.e. the induced map measure-preserving.

The plan produced at *every* iterate satisfies the source marginal exactly;
only the target marginal is approached over iterations.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .measures import (
    INNER_PRODUCT,
    DiscreteMeasure,
    KernelMatrix,
    TransportPlan,
    check_heights,
    check_masses,
    check_matched_totals,
    cost_matrix,
    inner_product_matrix,
    plan_cost,
)

FIXED = "fixed"
DIMINISHING = "diminishing"


class NumericalError(RuntimeError):
    """A solver produced non-finite intermediate values."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class EnvelopeAssignment:
    """Envelope values and tie sets for every source point.

    ``values[i]`` is the envelope maximum over targets for source i and
    ``tie_mask[i, j]`` is True when target j attains that maximum within
    the tie tolerance.  Every row of ``tie_mask`` contains at least one
    True entry (the argmax itself).
    """

    values: np.ndarray
    tie_mask: np.ndarray

    @property
    def n_sources(self) -> int:
        return self.values.shape[0]

    @property
    def n_targets(self) -> int:
        return self.tie_mask.shape[1]

    @property
    def tie_counts(self) -> np.ndarray:
        return self.tie_mask.sum(axis=1)

    def tie_sets(self) -> list[set[int]]:
        """Per-source sets of tied target indices."""
        return [set(np.flatnonzero(row).tolist()) for row in self.tie_mask]


@dataclass(frozen=True)
class BrenierConfig:
    """Gradient-descent settings for the semi-discrete solver.

    ``step_size`` and ``tolerance`` default to scale-aware values resolved
    at solve time: 0.1 * (max M - min M) / n_t and 1e-3 * max target mass.
    ``tie_tolerance`` is relative; a target j ties source i when
    ``M_ij + h_j >= value_i - tie_tolerance * (1 + |value_i|)``.
    """

    step_size: float | None = None
    max_steps: int = 1000
    tolerance: float | None = None
    tie_tolerance: float = 1e-9
    step_schedule: str = FIXED

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.tie_tolerance > 0:
            raise ValueError("tie_tolerance must be positive")
        if self.tolerance is not None and self.tie_tolerance >= self.tolerance:
            raise ValueError("tie_tolerance must be smaller than tolerance")
        if self.step_schedule not in (FIXED, DIMINISHING):
            raise ValueError(f"unknown step schedule {self.step_schedule!r}")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a semi-discrete solve.

    The plan and heights belong to the best iterate seen (smallest
    max-norm gradient residual), not necessarily the last one; fixed-step
    subgradient descent may cycle, and returning the best iterate makes
    that harmless.  ``empty_cells`` counts targets that received no mass
    at the returned iterate.
    """

    plan: TransportPlan
    heights: np.ndarray
    converged: bool
    iterations: int
    residual: float
    cost: float
    energy_trace: list[float] = field(repr=False)
    empty_cells: int = 0


def evaluate_envelope(M: KernelMatrix, h: np.ndarray, tie_tolerance: float = 1e-9) -> EnvelopeAssignment:
    """Evaluate the upper envelope max_j (M_ij + h_j) at every source.

    Returns per-source envelope values and the tie sets of targets
    attaining the maximum within ``tie_tolerance * (1 + |value|)``.
    """
    if M.kind != INNER_PRODUCT:
        raise ValueError(f"envelope needs an {INNER_PRODUCT} matrix, got {M.kind!r}")
    h = check_heights(h, M.shape[1])
    if not tie_tolerance > 0:
        raise ValueError("tie_tolerance must be positive")
    scores = M.entries + h[None, :]
    values = scores.max(axis=1)
    band = tie_tolerance * (1.0 + np.abs(values))
    tie_mask = scores >= (values - band)[:, None]
    return EnvelopeAssignment(values=values, tie_mask=tie_mask)


def cell_weights(assign: EnvelopeAssignment, p_s: np.ndarray) -> np.ndarray:
    """Approximate cell masses: each source splits uniformly over its ties.

    The result sums to the total source mass up to roundoff.
    """
    p_s = check_masses(p_s, assign.n_sources)
    counts = assign.tie_counts
    if (counts == 0).any():
        raise AssertionError("internal error: empty tie set")
    share = p_s / counts
    return share @ assign.tie_mask.astype(np.float64)


def energy(assign: EnvelopeAssignment, p_s: np.ndarray, p_t: np.ndarray, h: np.ndarray) -> float:
    """Convex energy in the intercepts: mass-weighted envelope minus <p_t, h>.

    Because the envelope value is shared by every tied target, the
    tie-split double sum over cells collapses to a single weighted sum
    over sources.
    """
    p_s = check_masses(p_s, assign.n_sources)
    p_t = check_masses(p_t, assign.n_targets)
    h = check_heights(h, assign.n_targets)
    return float(p_s @ assign.values - p_t @ h)


def gradient(w_hat: np.ndarray, p_t: np.ndarray) -> np.ndarray:
    """Energy gradient: cell weights minus target masses."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    p_t = np.asarray(p_t, dtype=np.float64)
    if w_hat.shape != p_t.shape:
        raise ValueError(f"length mismatch: {w_hat.shape} vs {p_t.shape}")
    return w_hat - p_t


def extract_plan(assign: EnvelopeAssignment, p_s: np.ndarray) -> TransportPlan:
    """Transport plan T_ij = p_s_i / |ties_i| on tied targets, 0 elsewhere.

    Row sums equal the source masses by construction, at every iterate.
    """
    p_s = check_masses(p_s, assign.n_sources)
    share = p_s / assign.tie_counts
    return TransportPlan(assign.tie_mask * share[:, None])


def default_step_size(M: KernelMatrix) -> float:
    """Scale-aware default step: 0.1 * (max M - min M) / n_t."""
    spread = float(M.entries.max() - M.entries.min())
    if spread == 0.0:
        return 1.0
    return 0.1 * spread / M.shape[1]


def solve(
    src: DiscreteMeasure,
    tgt: DiscreteMeasure,
    config: BrenierConfig | None = None,
    callback=None,
) -> SolveReport:
    """Run gradient descent on the envelope energy from h = 0.

    Each iteration updates ``h <- h - step * g``, re-evaluates the envelope
    at the sources, recomputes cell weights, and sets ``g`` to their gap
    from the target masses.  Stops when ``max|g| <= tolerance`` or after
    ``max_steps`` updates; the returned plan/heights are those of the
    iterate with the smallest residual seen.

    ``callback(step, h, assign, weights, grad)`` is invoked at every
    evaluated iterate, including the initial one at h = 0.

    Raises
    ------
    ValueError
        On dimension mismatch or mismatched totals.
    NumericalError
        If intermediate values become non-finite.
    """
    cfg = config or BrenierConfig()
    check_matched_totals(src.masses, tgt.masses)
    M = inner_product_matrix(src, tgt)
    p_s, p_t = src.masses, tgt.masses
    n_t = tgt.n

    step0 = cfg.step_size if cfg.step_size is not None else default_step_size(M)
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-3 * float(p_t.max())
    if not cfg.tie_tolerance < tol:
        raise ValueError(f"tie_tolerance {cfg.tie_tolerance:.1e} must be below tolerance {tol:.1e}")

    h = np.zeros(n_t)
    g = np.zeros(n_t)
    energy_trace: list[float] = []
    best_residual = np.inf
    best_h = h
    best_assign = None
    best_w = None
    iterations = 0

    for step in range(cfg.max_steps + 1):
        if step > 0:
            lam = step0 if cfg.step_schedule == FIXED else step0 / np.sqrt(step)
            h = h - lam * g
            if not np.isfinite(h).all():
                raise NumericalError("heights became non-finite", iteration=step)
        assign = evaluate_envelope(M, h, cfg.tie_tolerance)
        w = cell_weights(assign, p_s)
        g = gradient(w, p_t)
        energy_trace.append(energy(assign, p_s, p_t, h))
        residual = float(np.abs(g).max())
        if callback is not None:
            callback(step, h.copy(), assign, w, g)
        iterations = step
        if residual < best_residual:
            best_residual = residual
            best_h = h
            best_assign = assign
            best_w = w
        if best_residual <= tol:
            break

    plan = extract_plan(best_assign, p_s)
    return SolveReport(
        plan=plan,
        heights=best_h,
        converged=bool(best_residual <= tol),
        iterations=iterations,
        residual=best_residual,
        cost=plan_cost(plan, cost_matrix(src, tgt)),
        energy_trace=energy_trace,
        empty_cells=int(np.count_nonzero(best_w == 0.0)),
    )


class BrenierTransport(BaseEstimator):
    """Estimator wrapper around the semi-discrete gradient-descent solver.

    Parameters mirror :class:`BrenierConfig`.  After ``fit(Xs, Xt, ...)``
    the learned coupling and diagnostics are available as attributes, and
    ``transform`` maps points through the barycentric projection of the
    coupling (sources land on their assigned targets).

    Attributes
    ----------
    coupling_ : ndarray of shape (n_s, n_t)
    cost_ : float
        Total squared-Euclidean transport cost of the coupling.
    converged_ : bool
    n_iter_ : int
    residual_ : float
    report_ : SolveReport
    """

    def __init__(self, step_size=None, max_steps=1000, tol=None, tie_tol=1e-9, step_schedule=FIXED):
        self.step_size = step_size
        self.max_steps = max_steps
        self.tol = tol
        self.tie_tol = tie_tol
        self.step_schedule = step_schedule

    def _config(self) -> BrenierConfig:
        return BrenierConfig(
            step_size=self.step_size,
            max_steps=self.max_steps,
            tolerance=self.tol,
            tie_tolerance=self.tie_tol,
            step_schedule=self.step_schedule,
        )

    def fit(self, Xs, Xt, source_masses=None, target_masses=None):
        src = _as_measure(Xs, source_masses)
        tgt = _as_measure(Xt, target_masses)
        report = solve(src, tgt, self._config())
        self.source_ = src
        self.target_ = tgt
        self.report_ = report
        self.coupling_ = report.plan.entries
        self.heights_ = report.heights
        self.cost_ = report.cost
        self.converged_ = report.converged
        self.n_iter_ = report.iterations
        self.residual_ = report.residual
        return self

    def transform(self, Xs=None):
        """Barycentric projection of the fitted sources through the coupling."""
        if not hasattr(self, "coupling_"):
            raise ValueError("this estimator is not fitted yet; call fit first")
        if Xs is not None:
            Xs = np.asarray(Xs, dtype=np.float64)
            if Xs.shape != self.source_.points.shape or not np.allclose(Xs, self.source_.points):
                raise ValueError("transform is defined for the fitted source points only")
        rows = self.coupling_.sum(axis=1, keepdims=True)
        return (self.coupling_ @ self.target_.points) / rows


def _as_measure(X, masses) -> DiscreteMeasure:
    """Build a measure from an array, defaulting to uniform masses."""
    points = np.asarray(X, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if masses is None:
        masses = np.full(points.shape[0], 1.0 / points.shape[0])
    return DiscreteMeasure(points, masses)
