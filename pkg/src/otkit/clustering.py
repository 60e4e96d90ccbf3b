"""Point-cloud clustering under the transport objective.

Lloyd-style alternation: hold the centers fixed and solve a semi-discrete
transport problem from the cloud onto the centers (uniform mass 1/k per
center), then hold the plan fixed and move the centers to reduce
sum_ij T_ij |x_i - c_j|^2.  Centers move either by an explicit gradient
step or straight to the per-cluster barycenter, which minimizes the
fixed-plan objective exactly.

Unlike vanilla k-means, every cluster is forced to absorb the same 1/k
share of total mass, so clusters stay balanced even when the data are not.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .brenier import BrenierConfig, SolveReport, solve
from .measures import DiscreteMeasure, check_points

GRADIENT = "gradient"
BARYCENTER = "barycenter"
_CENTER_UPDATES = (GRADIENT, BARYCENTER)


@dataclass(frozen=True)
class ClusterConfig:
    """Knobs for the outer clustering loop.

    Parameters
    ----------
    n_clusters : number of centers k.
    outer_steps : alternations of (transport solve, center update).
    center_update : "gradient" moves centers along the fixed-plan cost
        gradient, "barycenter" jumps to the per-cluster weighted mean.
    center_step_size : gradient-mode step; default 0.5 / max column mass,
        an under-relaxed Newton step on the separable quadratic.
    inner : solver settings for the transport subproblem; None for defaults.
    seed : seeds the choice of initial centers among the source points.
    """

    n_clusters: int
    outer_steps: int = 10
    center_update: str = GRADIENT
    center_step_size: float | None = None
    inner: BrenierConfig | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be at least 1")
        if self.outer_steps < 1:
            raise ValueError("outer_steps must be at least 1")
        if self.center_update not in _CENTER_UPDATES:
            raise ValueError(f"center_update must be one of {_CENTER_UPDATES}")
        if self.center_step_size is not None and not self.center_step_size > 0:
            raise ValueError("center_step_size must be positive")


@dataclass(frozen=True)
class ClusterStep:
    """One alternation: the solve against ``centers``, then the update.

    ``cost`` is the transport cost of ``plan`` against ``centers``;
    ``fixed_plan_cost_after`` re-scores the same plan against
    ``updated_centers``, so barycenter updates can be checked to never
    increase it.  ``tie_rows`` counts points whose mass was split across
    several centers.
    """

    step: int
    centers: np.ndarray
    report: SolveReport
    cost: float
    assignments: np.ndarray
    tie_rows: int
    updated_centers: np.ndarray
    fixed_plan_cost_after: float


@dataclass(frozen=True)
class ClusterReport:
    steps: list[ClusterStep] = field(repr=False)
    centers: np.ndarray
    assignments: np.ndarray
    cost_trace: np.ndarray


def init_centers(measure: DiscreteMeasure, n_clusters: int, seed=None) -> np.ndarray:
    """Pick k distinct source points as starting centers."""
    if n_clusters > measure.n:
        raise ValueError(f"cannot place {n_clusters} centers on {measure.n} points")
    rng = np.random.default_rng(seed)
    idx = rng.choice(measure.n, size=n_clusters, replace=False)
    return measure.points[idx].copy()


def center_gradient(plan: np.ndarray, points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """d/dc_j of sum_ij T_ij |x_i - c_j|^2 with the plan held fixed.

    Equals 2 (colsum_j c_j - sum_i T_ij x_i) per center.
    """
    colsum = plan.sum(axis=0)
    return 2.0 * (colsum[:, None] * centers - plan.T @ points)


def fixed_plan_cost(plan: np.ndarray, points: np.ndarray, centers: np.ndarray) -> float:
    """sum_ij T_ij |x_i - c_j|^2 for given centers."""
    sq = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(np.sum(plan * sq))


def update_centers(
    plan: np.ndarray,
    points: np.ndarray,
    centers: np.ndarray,
    mode: str,
    step_size: float | None = None,
) -> np.ndarray:
    """Move centers to reduce the fixed-plan cost.

    Barycenter mode solves the fixed-plan subproblem exactly; centers with
    zero incoming mass stay put.  Gradient mode takes one explicit step.
    """
    colsum = plan.sum(axis=0)
    if mode == BARYCENTER:
        out = centers.copy()
        carries = colsum > 0
        out[carries] = (plan.T @ points)[carries] / colsum[carries, None]
        return out
    if mode == GRADIENT:
        if step_size is None:
            peak = float(colsum.max())
            if peak <= 0:
                return centers.copy()
            step_size = 0.5 / peak
        return centers - step_size * center_gradient(plan, points, centers)
    raise ValueError(f"center_update must be one of {_CENTER_UPDATES}")


def cluster(source: DiscreteMeasure, config: ClusterConfig, callback=None) -> ClusterReport:
    """Run the alternating loop for ``config.outer_steps`` rounds.

    Each round solves source -> current centers with uniform target masses
    1/k, labels each point by its heaviest plan entry, then updates the
    centers.  ``callback(step_record)`` sees every round.
    """
    k = config.n_clusters
    centers = init_centers(source, k, config.seed)
    target_masses = np.full(k, source.total_mass / k)
    inner = config.inner if config.inner is not None else BrenierConfig()

    steps: list[ClusterStep] = []
    for s in range(config.outer_steps):
        target = DiscreteMeasure(centers, target_masses)
        report = solve(source, target, inner)
        plan = report.plan.entries
        # argmax returns the lowest index among tied maxima
        assignments = np.argmax(plan, axis=1)
        tie_rows = int(np.sum((plan > 0).sum(axis=1) > 1))
        updated = update_centers(
            plan, source.points, centers, config.center_update, config.center_step_size
        )
        record = ClusterStep(
            step=s,
            centers=centers,
            report=report,
            cost=report.cost,
            assignments=assignments,
            tie_rows=tie_rows,
            updated_centers=updated,
            fixed_plan_cost_after=fixed_plan_cost(plan, source.points, updated),
        )
        steps.append(record)
        if callback is not None:
            callback(record)
        centers = updated

    return ClusterReport(
        steps=steps,
        centers=centers,
        assignments=steps[-1].assignments,
        cost_trace=np.array([r.cost for r in steps]),
    )


class WassersteinKMeans(ClusterMixin, BaseEstimator):
    """Balanced k-means where assignment is a transport solve.

    Parameters mirror :class:`ClusterConfig`; inner-solver knobs are
    exposed flat so the estimator clones cleanly.

    Attributes
    ----------
    cluster_centers_ : (k, d) final centers.
    labels_ : per-point cluster of the last round's plan.
    cost_trace_ : transport cost per outer step.
    report_ : full :class:`ClusterReport`.
    """

    def __init__(
        self,
        n_clusters=5,
        outer_steps=10,
        center_update=GRADIENT,
        center_step_size=None,
        step_size=None,
        max_steps=1000,
        tolerance=None,
        seed=None,
    ):
        self.n_clusters = n_clusters
        self.outer_steps = outer_steps
        self.center_update = center_update
        self.center_step_size = center_step_size
        self.step_size = step_size
        self.max_steps = max_steps
        self.tolerance = tolerance
        self.seed = seed

    def fit(self, X, y=None, sample_weight=None):
        X = check_points(X)
        if sample_weight is None:
            masses = np.full(X.shape[0], 1.0 / X.shape[0])
        else:
            masses = np.asarray(sample_weight, dtype=np.float64)
        source = DiscreteMeasure(X, masses)
        config = ClusterConfig(
            n_clusters=self.n_clusters,
            outer_steps=self.outer_steps,
            center_update=self.center_update,
            center_step_size=self.center_step_size,
            inner=BrenierConfig(
                step_size=self.step_size,
                max_steps=self.max_steps,
                tolerance=self.tolerance,
            ),
            seed=self.seed,
        )
        report = cluster(source, config)
        self.report_ = report
        self.cluster_centers_ = report.centers
        self.labels_ = report.assignments
        self.cost_trace_ = report.cost_trace
        self.n_iter_ = self.outer_steps
        return self

    def predict(self, X):
        X = check_points(X)
        d2 = ((X[:, None, :] - self.cluster_centers_[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)
