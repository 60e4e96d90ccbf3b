"""Entropic optimal transport by Sinkhorn-Knopp matrix scaling.

The plan is parameterized as ``T = diag(u) K diag(v)`` with kernel
``K = exp(-C / reg)``, so the regularization sign convention makes the
plan approach the unregularized optimum as ``reg`` tends to zero.
Rescaling alternates between the two marginals: a row rescale
``u <- p_s / (K v)`` enforces the source marginal exactly, a column
rescale ``v <- p_t / (K^T u)`` enforces the target marginal exactly, and
the condition not enforced by the latest rescale shrinks over iterations.

For small ``reg`` relative to the cost scale the kernel underflows to
zero and a scaling denominator vanishes; the default path detects this
and aborts honestly with ``failed_zero_denominator`` set, returning the
last finite iterate.  The opt-in stabilized path runs the same iteration
in the log domain via log-sum-exp and cannot underflow.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .brenier import _as_measure
from .measures import (
    SQUARED_EUCLIDEAN,
    KernelMatrix,
    TransportPlan,
    check_masses,
    check_matched_totals,
    cost_matrix,
)

ROW = "row"
COL = "col"


@dataclass(frozen=True)
class SinkhornConfig:
    """Scaling-loop settings.

    ``regularization`` is the entropy coefficient; smaller values track the
    exact optimum more closely but underflow the kernel sooner.  A scaling
    denominator below ``underflow_floor`` aborts the default path.
    """

    regularization: float = 1.0
    max_iters: int = 10_000
    marginal_tolerance: float = 1e-8
    underflow_floor: float = 1e-300
    stabilized: bool = False

    def __post_init__(self):
        if not self.regularization > 0:
            raise ValueError("regularization must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.marginal_tolerance > 0:
            raise ValueError("marginal_tolerance must be positive")
        if not self.underflow_floor > 0:
            raise ValueError("underflow_floor must be positive")


@dataclass(frozen=True)
class SinkhornReport:
    """Outcome of a Sinkhorn solve.

    ``residual_trace`` records, after each half-iteration, which marginal
    that rescale enforced (``"row"`` or ``"col"``) plus both max-norm
    marginal violations at that moment, making the alternation observable.
    Marginals of the returned plan hold within ``marginal_tolerance`` only
    when ``converged``.
    """

    plan: TransportPlan
    cost: float
    converged: bool
    iterations: int
    failed_zero_denominator: bool
    row_residual: float
    col_residual: float
    residual_trace: list[tuple[str, float, float]] = field(repr=False)


def sinkhorn_solve(
    C: KernelMatrix,
    p_s: np.ndarray,
    p_t: np.ndarray,
    config: SinkhornConfig | None = None,
) -> SinkhornReport:
    """Scale ``exp(-C/reg)`` until both marginals hold within tolerance.

    Starts from ``v = 1`` and rescales rows then columns each iteration.
    Convergence is checked after the row rescale on the target-marginal
    violation (the condition that rescale does not enforce); at that point
    the source marginal holds exactly, so both marginals are within
    tolerance on a converged return.

    On a zero denominator the default path returns the last finite iterate
    with ``failed_zero_denominator=True``; the stabilized path runs in the
    log domain instead and never trips the floor.
    """
    cfg = config or SinkhornConfig()
    if C.kind != SQUARED_EUCLIDEAN:
        raise ValueError(f"sinkhorn needs a {SQUARED_EUCLIDEAN} matrix, got {C.kind!r}")
    n_s, n_t = C.shape
    p_s = check_masses(p_s, n_s)
    p_t = check_masses(p_t, n_t)
    check_matched_totals(p_s, p_t)
    if cfg.stabilized:
        return _solve_log_domain(C.entries, p_s, p_t, cfg)
    return _solve_scaling(C.entries, p_s, p_t, cfg)


def _residuals(T: np.ndarray, p_s: np.ndarray, p_t: np.ndarray) -> tuple[float, float]:
    row = float(np.abs(T.sum(axis=1) - p_s).max())
    col = float(np.abs(T.sum(axis=0) - p_t).max())
    return row, col


def _solve_scaling(C, p_s, p_t, cfg: SinkhornConfig) -> SinkhornReport:
    K = np.exp(-C / cfg.regularization)
    u = np.ones_like(p_s)
    v = np.ones_like(p_t)
    trace: list[tuple[str, float, float]] = []
    converged = False
    failed = False
    iterations = 0

    for it in range(1, cfg.max_iters + 1):
        iterations = it
        Kv = K @ v
        if (Kv < cfg.underflow_floor).any():
            failed = True
            iterations = it - 1
            break
        u = p_s / Kv
        T = (u[:, None] * K) * v[None, :]
        row_res, col_res = _residuals(T, p_s, p_t)
        trace.append((ROW, row_res, col_res))
        if col_res <= cfg.marginal_tolerance:
            converged = True
            break
        Ku = K.T @ u
        if (Ku < cfg.underflow_floor).any():
            failed = True
            break
        v = p_t / Ku
        T = (u[:, None] * K) * v[None, :]
        row_res, col_res = _residuals(T, p_s, p_t)
        trace.append((COL, row_res, col_res))

    T = (u[:, None] * K) * v[None, :]
    row_res, col_res = _residuals(T, p_s, p_t)
    return SinkhornReport(
        plan=TransportPlan(T),
        cost=float(np.sum(T * C)),
        converged=converged,
        iterations=iterations,
        failed_zero_denominator=failed,
        row_residual=row_res,
        col_residual=col_res,
        residual_trace=trace,
    )


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    peak = a.max(axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - peak), axis=axis)) + np.squeeze(peak, axis=axis)
    return out


def _solve_log_domain(C, p_s, p_t, cfg: SinkhornConfig) -> SinkhornReport:
    log_K = -C / cfg.regularization
    with np.errstate(divide="ignore"):
        log_ps = np.log(p_s)
        log_pt = np.log(p_t)
    log_u = np.zeros_like(p_s)
    log_v = np.zeros_like(p_t)
    trace: list[tuple[str, float, float]] = []
    converged = False
    iterations = 0

    def plan() -> np.ndarray:
        return np.exp(log_u[:, None] + log_K + log_v[None, :])

    for it in range(1, cfg.max_iters + 1):
        iterations = it
        log_u = log_ps - _logsumexp(log_K + log_v[None, :], axis=1)
        row_res, col_res = _residuals(plan(), p_s, p_t)
        trace.append((ROW, row_res, col_res))
        if col_res <= cfg.marginal_tolerance:
            converged = True
            break
        log_v = log_pt - _logsumexp(log_K.T + log_u[None, :], axis=1)
        row_res, col_res = _residuals(plan(), p_s, p_t)
        trace.append((COL, row_res, col_res))

    T = plan()
    row_res, col_res = _residuals(T, p_s, p_t)
    return SinkhornReport(
        plan=TransportPlan(T),
        cost=float(np.sum(T * C)),
        converged=converged,
        iterations=iterations,
        failed_zero_denominator=False,
        row_residual=row_res,
        col_residual=col_res,
        residual_trace=trace,
    )


class SinkhornTransport(BaseEstimator):
    """Estimator wrapper around the entropic scaling solver.

    Attributes after ``fit(Xs, Xt, ...)`` mirror :class:`SinkhornReport`:
    ``coupling_``, ``cost_``, ``converged_``, ``n_iter_``,
    ``failed_zero_denominator_``, ``report_``.
    """

    def __init__(self, reg=1.0, max_iters=10_000, marginal_tol=1e-8, underflow_floor=1e-300, stabilized=False):
        self.reg = reg
        self.max_iters = max_iters
        self.marginal_tol = marginal_tol
        self.underflow_floor = underflow_floor
        self.stabilized = stabilized

    def _config(self) -> SinkhornConfig:
        return SinkhornConfig(
            regularization=self.reg,
            max_iters=self.max_iters,
            marginal_tolerance=self.marginal_tol,
            underflow_floor=self.underflow_floor,
            stabilized=self.stabilized,
        )

    def fit(self, Xs, Xt, source_masses=None, target_masses=None):
        src = _as_measure(Xs, source_masses)
        tgt = _as_measure(Xt, target_masses)
        report = sinkhorn_solve(cost_matrix(src, tgt), src.masses, tgt.masses, self._config())
        self.source_ = src
        self.target_ = tgt
        self.report_ = report
        self.coupling_ = report.plan.entries
        self.cost_ = report.cost
        self.converged_ = report.converged
        self.n_iter_ = report.iterations
        self.failed_zero_denominator_ = report.failed_zero_denominator
        return self
