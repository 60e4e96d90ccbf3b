import numpy as np
import pytest

from otkit.exact_lp import ExactTransport, brute_force_solve, lp_solve
from otkit.measures import (
    SQUARED_EUCLIDEAN,
    DiscreteMeasure,
    KernelMatrix,
    cost_matrix,
    marginal_residuals,
)


def monotone_plan_cost_1d(xs, ps, xt, pt):
    """Optimal 1d transport cost by the classic sorted-merge rule.

    For points on a line with squared distance, mass moves monotonically:
    sort both sides and peel mass greedily.  Independent of the simplex.
    """
    order_s = np.argsort(xs)
    order_t = np.argsort(xt)
    xs, ps = xs[order_s], list(ps[order_s])
    xt, pt = xt[order_t], list(pt[order_t])
    i = j = 0
    cost = 0.0
    while i < len(ps) and j < len(pt):
        q = min(ps[i], pt[j])
        cost += q * (xs[i] - xt[j]) ** 2
        ps[i] -= q
        pt[j] -= q
        if ps[i] <= 1e-15:
            i += 1
        if j < len(pt) and pt[j] <= 1e-15:
            j += 1
    return cost


def random_pair(rng, n_s, n_t, d=2):
    ps = rng.uniform(0.2, 1.0, n_s)
    ps /= ps.sum()
    pt = rng.uniform(0.2, 1.0, n_t)
    pt /= pt.sum()
    src = DiscreteMeasure(rng.normal(size=(n_s, d)), ps)
    tgt = DiscreteMeasure(rng.normal(size=(n_t, d)), pt)
    return src, tgt


class TestHandOracles:
    def test_two_by_two_cross_flow(self):
        # line sources at 0,1 (masses .7,.3) onto 0,1 (masses .3,.7):
        # keep what can stay put, move the surplus .4 across distance 1
        src = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.7, 0.3]))
        tgt = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.3, 0.7]))
        report = lp_solve(cost_matrix(src, tgt), src.masses, tgt.masses)
        assert report.cost == pytest.approx(0.4, abs=1e-12)
        assert np.allclose(report.plan.entries, [[0.3, 0.4], [0.0, 0.3]], atol=1e-12)

    def test_identity_when_clouds_match(self):
        pts = np.array([[0.0, 0.0], [5.0, 1.0], [2.0, -3.0]])
        m = np.array([0.2, 0.3, 0.5])
        src = DiscreteMeasure(pts, m)
        tgt = DiscreteMeasure(pts.copy(), m.copy())
        report = lp_solve(cost_matrix(src, tgt), m, m)
        assert report.cost == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(report.plan.entries, np.diag(m), atol=1e-12)

    def test_matches_sorted_merge_on_the_line(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            n_s = int(rng.integers(2, 9))
            n_t = int(rng.integers(2, 9))
            src, tgt = random_pair(rng, n_s, n_t, d=1)
            report = lp_solve(cost_matrix(src, tgt), src.masses, tgt.masses)
            expected = monotone_plan_cost_1d(
                src.points[:, 0], src.masses, tgt.points[:, 0], tgt.masses
            )
            assert report.cost == pytest.approx(expected, rel=1e-10, abs=1e-12)


class TestAgainstBruteForce:
    def test_agreement_on_many_micro_instances(self):
        rng = np.random.default_rng(1)
        checked = 0
        while checked < 120:
            n_s = int(rng.integers(1, 5))
            n_t = int(rng.integers(1, 5))
            if n_s * n_t > 12:
                continue
            g = int(rng.integers(1, 5))
            total = int(rng.integers(max(n_s, n_t), 13))

            def parts(total, k):
                if k == 1:
                    return np.array([total])
                cuts = np.sort(rng.choice(np.arange(1, total), size=k - 1, replace=False))
                return np.diff(np.concatenate([[0], cuts, [total]]))

            if total < max(n_s, n_t):
                continue
            ps = parts(total, n_s) / g
            pt = parts(total, n_t) / g
            src = DiscreteMeasure(rng.normal(size=(n_s, 2)), ps)
            tgt = DiscreteMeasure(rng.normal(size=(n_t, 2)), pt)
            C = cost_matrix(src, tgt)
            brute = brute_force_solve(C, ps, pt, granularity=g)
            simplex = lp_solve(C, ps, pt)
            assert abs(brute.cost - simplex.cost) <= 1e-9 * (1 + abs(brute.cost))
            brow, bcol = marginal_residuals(brute.plan, ps, pt)
            assert max(brow, bcol) <= 1e-9
            checked += 1

    def test_brute_force_tie_break_is_deterministic(self):
        # two symmetric optima exist; enumeration ascends cell values, so
        # the lexicographically smallest flattened plan wins
        C = KernelMatrix(np.array([[1.0, 1.0], [1.0, 1.0]]), SQUARED_EUCLIDEAN)
        p = np.array([0.5, 0.5])
        report = brute_force_solve(C, p, p, granularity=2)
        assert np.allclose(report.plan.entries, [[0.0, 0.5], [0.5, 0.0]])


class TestStructure:
    def test_solution_is_a_vertex(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n_s = int(rng.integers(2, 12))
            n_t = int(rng.integers(2, 12))
            src, tgt = random_pair(rng, n_s, n_t)
            report = lp_solve(cost_matrix(src, tgt), src.masses, tgt.masses)
            assert int(np.sum(report.plan.entries > 1e-12)) <= n_s + n_t - 1
            row, col = marginal_residuals(report.plan, src.masses, tgt.masses)
            assert max(row, col) <= 1e-9

    def test_duplicated_points_and_uniform_masses(self):
        # heavy degeneracy: many equal costs and equal masses
        pts = np.array([[0.0, 0.0]] * 4 + [[1.0, 0.0]] * 4)
        src = DiscreteMeasure(pts, np.full(8, 0.125))
        tgt = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
        report = lp_solve(cost_matrix(src, tgt), src.masses, tgt.masses)
        assert report.cost == pytest.approx(0.0, abs=1e-12)

    def test_single_row_and_single_column(self):
        src = DiscreteMeasure(np.array([[0.0]]), np.array([1.0]))
        tgt = DiscreteMeasure(np.array([[1.0], [2.0], [4.0]]), np.array([0.5, 0.25, 0.25]))
        report = lp_solve(cost_matrix(src, tgt), src.masses, tgt.masses)
        assert np.allclose(report.plan.entries, [[0.5, 0.25, 0.25]])
        assert report.cost == pytest.approx(0.5 * 1 + 0.25 * 4 + 0.25 * 16, abs=1e-12)

    def test_reference_lp_agreement(self):
        # independent check against a generic LP solver
        from scipy.optimize import linprog

        rng = np.random.default_rng(3)
        for _ in range(15):
            n_s = int(rng.integers(2, 7))
            n_t = int(rng.integers(2, 7))
            src, tgt = random_pair(rng, n_s, n_t)
            C = cost_matrix(src, tgt)
            report = lp_solve(C, src.masses, tgt.masses)
            A = []
            for i in range(n_s):
                row = np.zeros(n_s * n_t)
                row[i * n_t : (i + 1) * n_t] = 1
                A.append(row)
            for j in range(n_t):
                row = np.zeros(n_s * n_t)
                row[j::n_t] = 1
                A.append(row)
            b = np.concatenate([src.masses, tgt.masses])
            res = linprog(C.entries.ravel(), A_eq=np.array(A), b_eq=b, method="highs")
            assert res.status == 0
            assert report.cost == pytest.approx(res.fun, rel=1e-9, abs=1e-12)


class TestBruteForceGuards:
    def test_too_many_cells_rejected(self):
        rng = np.random.default_rng(4)
        src, tgt = random_pair(rng, 4, 4)
        with pytest.raises(ValueError, match="cells"):
            brute_force_solve(cost_matrix(src, tgt), src.masses, tgt.masses, granularity=4)

    def test_mass_off_grid_rejected(self):
        C = KernelMatrix(np.array([[0.0, 1.0]]), SQUARED_EUCLIDEAN)
        with pytest.raises(ValueError, match="multiple"):
            brute_force_solve(C, np.array([1.0]), np.array([0.37, 0.63]), granularity=2)

    def test_total_mass_cap(self):
        C = KernelMatrix(np.array([[0.0, 1.0]]), SQUARED_EUCLIDEAN)
        with pytest.raises(ValueError, match="mass"):
            brute_force_solve(C, np.array([13.0]), np.array([6.0, 7.0]), granularity=1)

    def test_granularity_must_be_positive_integer(self):
        C = KernelMatrix(np.array([[0.0]]), SQUARED_EUCLIDEAN)
        with pytest.raises(ValueError):
            brute_force_solve(C, np.array([1.0]), np.array([1.0]), granularity=0)


class TestEstimator:
    def test_methods_agree_on_grid_instance(self):
        rng = np.random.default_rng(5)
        Xs, Xt = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        simplex = ExactTransport().fit(Xs, Xt)
        brute = ExactTransport(method="brute_force", granularity=3).fit(Xs, Xt)
        assert simplex.cost_ == pytest.approx(brute.cost_, abs=1e-12)

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            ExactTransport(method="oracle").fit(np.zeros((1, 1)), np.zeros((1, 1)))
