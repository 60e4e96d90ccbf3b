"""Exact optimal transport: network simplex and a brute-force oracle.

``lp_solve`` runs a primal network simplex specialized to the dense
bipartite transportation graph: a northwest-corner starting basis, duals
propagated over the basis tree, entering cells picked by most negative
reduced cost (lowest index on ties), and leaving cells picked by lowest
index among the cycle's minimum-flow candidates, so runs are reproducible.
Solutions are vertices of the transportation polytope: only basis cells
carry flow, so a plan has at most ``n_s + n_t - 1`` nonzero entries.

``brute_force_solve`` exhaustively enumerates integer flows on a fixed
mass grid.  It is deliberately tiny-instance-only and exists as an
independent check on the simplex.
"""

from dataclasses import dataclass

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

NETWORK_SIMPLEX = "network_simplex"
BRUTE_FORCE = "brute_force"

# Enumeration caps: integer total mass and cell count small enough to keep
# the candidate set well under ~1e6.
MAX_BRUTE_MASS = 12
MAX_BRUTE_CELLS = 12


@dataclass(frozen=True)
class ExactReport:
    """An exact solve outcome: optimal plan, its cost, and the method used.

    ``iterations`` counts simplex pivots for the network simplex and
    feasible plans examined for the brute-force enumerator.
    """

    plan: TransportPlan
    cost: float
    method: str
    iterations: int


def lp_solve(C: KernelMatrix, p_s, p_t) -> ExactReport:
    """Minimize sum_ij T_ij C_ij over the transportation polytope.

    Raises
    ------
    ValueError
        If marginal totals differ beyond tolerance or C has the wrong kind.
    """
    if C.kind != SQUARED_EUCLIDEAN:
        raise ValueError(f"lp_solve needs a {SQUARED_EUCLIDEAN} matrix, got {C.kind!r}")
    n_s, n_t = C.shape
    p_s = check_masses(p_s, n_s)
    p_t = check_masses(p_t, n_t)
    check_matched_totals(p_s, p_t)
    plan, pivots = _network_simplex(C.entries, p_s, p_t)
    return ExactReport(
        plan=TransportPlan(plan),
        cost=float(np.sum(plan * C.entries)),
        method=NETWORK_SIMPLEX,
        iterations=pivots,
    )


def brute_force_solve(C: KernelMatrix, p_s, p_t, granularity: int) -> ExactReport:
    """Enumerate every integer flow on the 1/granularity mass grid.

    Masses must be exact integer multiples of ``1/granularity``; the total
    integer mass may not exceed 12 and the plan may not exceed 12 cells.
    The lexicographically first minimum-cost flow is returned, scaled back
    to mass units.
    """
    n_s, n_t = C.shape
    p_s = check_masses(p_s, n_s)
    p_t = check_masses(p_t, n_t)
    if granularity < 1 or granularity != int(granularity):
        raise ValueError("granularity must be a positive integer")
    if n_s * n_t > MAX_BRUTE_CELLS:
        raise ValueError(f"instance too large for enumeration: {n_s}x{n_t} > {MAX_BRUTE_CELLS} cells")

    rows = _grid_masses(p_s, granularity, "source")
    cols = _grid_masses(p_t, granularity, "target")
    if rows.sum() != cols.sum():
        raise ValueError("grid marginals are infeasible: row and column totals differ")
    if rows.sum() > MAX_BRUTE_MASS:
        raise ValueError(f"instance too large for enumeration: total integer mass {rows.sum()} > {MAX_BRUTE_MASS}")

    costs = C.entries
    best_cost = np.inf
    best_rows: list[tuple[int, ...]] = []
    stack_rows: list[tuple[int, ...]] = []
    examined = 0

    def recurse(i: int, caps: tuple[int, ...], partial: float) -> None:
        nonlocal best_cost, best_rows, examined
        if i == n_s:
            if all(c == 0 for c in caps):
                examined += 1
                if partial < best_cost:
                    best_cost = partial
                    best_rows = list(stack_rows)
            return
        for comp in _compositions(int(rows[i]), caps):
            stack_rows.append(comp)
            new_caps = tuple(c - t for c, t in zip(caps, comp))
            recurse(i + 1, new_caps, partial + sum(t * costs[i, j] for j, t in enumerate(comp)))
            stack_rows.pop()

    recurse(0, tuple(int(c) for c in cols), 0.0)
    if not np.isfinite(best_cost):
        raise ValueError("no feasible integer flow exists for the given grid marginals")

    plan = np.array(best_rows, dtype=np.float64) / granularity
    return ExactReport(
        plan=TransportPlan(plan),
        cost=float(np.sum(plan * costs)),
        method=BRUTE_FORCE,
        iterations=examined,
    )


def _grid_masses(masses: np.ndarray, granularity: int, side: str) -> np.ndarray:
    scaled = masses * granularity
    rounded = np.rint(scaled)
    off = np.abs(scaled - rounded)
    if (off > 1e-9).any():
        worst = int(np.argmax(off))
        raise ValueError(
            f"{side} mass {masses[worst]!r} is not an integer multiple of 1/{granularity}"
        )
    return rounded.astype(np.int64)


def _compositions(total: int, caps: tuple[int, ...]):
    """Yield tuples summing to ``total`` with entries bounded by ``caps``."""
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - first, caps[1:]):
            yield (first, *rest)


# ---------------------------------------------------------------------------
# Network simplex
# ---------------------------------------------------------------------------


def _network_simplex(costs: np.ndarray, p_s: np.ndarray, p_t: np.ndarray):
    """Primal simplex on the bipartite transportation graph.

    Nodes 0..n_s-1 are sources, n_s..n_s+n_t-1 targets; the basis is a
    spanning tree of n_s + n_t - 1 cells.  Degenerate stalling triggers a
    switch to Bland's rule (lowest-index entering cell), which breaks
    cycling.  Flows are re-derived from the final tree by leaf elimination
    so marginal error does not accumulate over pivots.

    Returns the optimal plan and the pivot count.
    """
    n_s, n_t = costs.shape
    basis, flows = _northwest_corner(p_s, p_t)
    eps = 1e-10 * (1.0 + float(np.abs(costs).max()))
    degen_tol = 1e-12 * float(p_s.sum())
    max_pivots = 200 * (n_s + n_t) + 10_000
    degenerate_streak = 0
    bland = False
    pivots = 0

    for pivots in range(max_pivots):
        u, v = _tree_duals(costs, basis, n_s, n_t)
        reduced = costs - u[:, None] - v[None, :]
        if bland:
            eligible = np.flatnonzero(reduced.ravel() < -eps)
            if eligible.size == 0:
                break
            flat = int(eligible[0])
        else:
            flat = int(np.argmin(reduced.ravel()))
            if reduced.ravel()[flat] >= -eps:
                break
        enter = (flat // n_t, flat % n_t)

        cycle = _cycle_edges(basis, enter, n_s, n_t)
        minus = cycle[0::2]  # path edges at even positions lose flow
        plus = cycle[1::2]
        theta = min(flows[e] for e in minus)
        leave = min(e for e in minus if flows[e] == theta)

        for e in minus:
            flows[e] -= theta
        for e in plus:
            flows[e] += theta
        flows[enter] = theta
        del flows[leave]
        basis.remove(leave)
        basis.append(enter)

        if theta <= degen_tol:
            degenerate_streak += 1
            if degenerate_streak > 20 * (n_s + n_t):
                bland = True
        else:
            degenerate_streak = 0
    else:
        raise RuntimeError("network simplex exceeded its pivot budget")

    return _tree_flows(basis, p_s, p_t), pivots


def _northwest_corner(p_s: np.ndarray, p_t: np.ndarray):
    """Staircase starting basis with exactly n_s + n_t - 1 cells."""
    n_s, n_t = len(p_s), len(p_t)
    a = p_s.astype(np.float64).copy()
    b = p_t.astype(np.float64).copy()
    basis: list[tuple[int, int]] = []
    flows: dict[tuple[int, int], float] = {}
    i = j = 0
    while True:
        q = min(a[i], b[j])
        basis.append((i, j))
        flows[(i, j)] = q
        a[i] -= q
        b[j] -= q
        if i == n_s - 1 and j == n_t - 1:
            break
        if j == n_t - 1:
            i += 1
        elif i == n_s - 1:
            j += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return basis, flows


def _adjacency(basis: list[tuple[int, int]], n_s: int, n_t: int) -> list[list[tuple[int, tuple[int, int]]]]:
    adj: list[list[tuple[int, tuple[int, int]]]] = [[] for _ in range(n_s + n_t)]
    for cell in basis:
        i, j = cell
        adj[i].append((n_s + j, cell))
        adj[n_s + j].append((i, cell))
    return adj


def _tree_duals(costs: np.ndarray, basis: list[tuple[int, int]], n_s: int, n_t: int):
    """Propagate u_i + v_j = c_ij over the basis tree from u_0 = 0."""
    adj = _adjacency(basis, n_s, n_t)
    u = np.zeros(n_s)
    v = np.zeros(n_t)
    seen = np.zeros(n_s + n_t, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        node = stack.pop()
        for nbr, (i, j) in adj[node]:
            if not seen[nbr]:
                seen[nbr] = True
                if nbr >= n_s:
                    v[j] = costs[i, j] - u[i]
                else:
                    u[i] = costs[i, j] - v[j]
                stack.append(nbr)
    return u, v


def _cycle_edges(
    basis: list[tuple[int, int]], enter: tuple[int, int], n_s: int, n_t: int
) -> list[tuple[int, int]]:
    """Basis edges on the tree path closed into a cycle by ``enter``.

    Returned in path order from the entering cell's source node to its
    target node; edges at even positions alternate against the entering
    cell and lose flow when it gains.
    """
    adj = _adjacency(basis, n_s, n_t)
    start, goal = enter[0], n_s + enter[1]
    parent: dict[int, tuple[int, tuple[int, int]]] = {start: (-1, (-1, -1))}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nbr, cell in adj[node]:
            if nbr not in parent:
                parent[nbr] = (node, cell)
                stack.append(nbr)
    edges: list[tuple[int, int]] = []
    node = goal
    while node != start:
        prev, cell = parent[node]
        edges.append(cell)
        node = prev
    edges.reverse()
    return edges


def _tree_flows(basis: list[tuple[int, int]], p_s: np.ndarray, p_t: np.ndarray) -> np.ndarray:
    """Unique flows on the basis tree, solved by leaf elimination."""
    n_s, n_t = len(p_s), len(p_t)
    balance = np.concatenate([p_s.astype(np.float64), p_t.astype(np.float64)])
    degree = np.zeros(n_s + n_t, dtype=np.int64)
    incident: list[list[tuple[int, int]]] = [[] for _ in range(n_s + n_t)]
    alive = {cell: True for cell in basis}
    for cell in basis:
        i, j = cell
        degree[i] += 1
        degree[n_s + j] += 1
        incident[i].append(cell)
        incident[n_s + j].append(cell)

    plan = np.zeros((n_s, n_t))
    leaves = [node for node in range(n_s + n_t) if degree[node] == 1]
    while leaves:
        node = leaves.pop()
        edge = next((c for c in incident[node] if alive[c]), None)
        if edge is None:
            continue
        i, j = edge
        flow = balance[node]
        plan[i, j] = max(flow, 0.0)
        alive[edge] = False
        other = n_s + j if node == i else i
        balance[other] -= flow
        degree[other] -= 1
        degree[node] -= 1
        if degree[other] == 1:
            leaves.append(other)
    return plan


class ExactTransport(BaseEstimator):
    """Estimator wrapper around the exact solvers.

    ``method`` selects the network simplex (default) or, for tiny
    grid-mass instances, the brute-force enumerator with ``granularity``.
    Attributes after ``fit``: ``coupling_``, ``cost_``, ``report_``.
    """

    def __init__(self, method=NETWORK_SIMPLEX, granularity=1):
        self.method = method
        self.granularity = granularity

    def fit(self, Xs, Xt, source_masses=None, target_masses=None):
        src = _as_measure(Xs, source_masses)
        tgt = _as_measure(Xt, target_masses)
        C = cost_matrix(src, tgt)
        if self.method == NETWORK_SIMPLEX:
            report = lp_solve(C, src.masses, tgt.masses)
        elif self.method == BRUTE_FORCE:
            report = brute_force_solve(C, src.masses, tgt.masses, self.granularity)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.source_ = src
        self.target_ = tgt
        self.report_ = report
        self.coupling_ = report.plan.entries
        self.cost_ = report.cost
        self.n_iter_ = report.iterations
        return self
