import numpy as np
import pytest

from otkit.exact_lp import lp_solve
from otkit.measures import (
    SQUARED_EUCLIDEAN,
    DiscreteMeasure,
    KernelMatrix,
    cost_matrix,
    marginal_residuals,
)
from otkit.sinkhorn import COL, ROW, SinkhornConfig, SinkhornTransport, sinkhorn_solve


def random_pair(seed, n_s=7, n_t=5):
    rng = np.random.default_rng(seed)
    src = DiscreteMeasure(rng.normal(size=(n_s, 2)), rng.uniform(0.5, 1.5, n_s) / n_s)
    q = rng.uniform(0.5, 1.5, n_t)
    tgt = DiscreteMeasure(rng.normal(size=(n_t, 2)), q * src.total_mass / q.sum())
    return src, tgt


class TestClosedForm:
    def test_symmetric_two_by_two(self):
        # C = [[0,1],[1,0]], both marginals (1/2,1/2).  By symmetry the
        # scaled kernel is a*K with row sums 1/2, so the diagonal entry is
        # 0.5 / (1 + exp(-1/reg)) in closed form.
        C = KernelMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), SQUARED_EUCLIDEAN)
        half = np.array([0.5, 0.5])
        for reg in (0.3, 1.0, 4.0):
            report = sinkhorn_solve(C, half, half, SinkhornConfig(regularization=reg))
            assert report.converged
            diag = 0.5 / (1.0 + np.exp(-1.0 / reg))
            expected = np.array([[diag, 0.5 - diag], [0.5 - diag, diag]])
            assert np.allclose(report.plan.entries, expected, atol=1e-8)
            expected_cost = 2 * (0.5 - diag)
            assert report.cost == pytest.approx(expected_cost, abs=1e-8)

    def test_single_cell(self):
        C = KernelMatrix(np.array([[2.0]]), SQUARED_EUCLIDEAN)
        report = sinkhorn_solve(C, np.array([0.7]), np.array([0.7]))
        assert report.converged
        assert report.plan.entries[0, 0] == pytest.approx(0.7, abs=1e-12)
        assert report.cost == pytest.approx(1.4, abs=1e-12)


class TestAlternation:
    def test_each_half_step_repairs_its_marginal(self):
        src, tgt = random_pair(0)
        C = cost_matrix(src, tgt)
        report = sinkhorn_solve(C, src.masses, tgt.masses, SinkhornConfig(regularization=0.5))
        assert report.residual_trace
        tags = [tag for tag, _, _ in report.residual_trace]
        assert tags[0] == ROW
        for k in range(1, len(tags)):
            assert tags[k] != tags[k - 1], "half-steps must alternate"
        for tag, row_res, col_res in report.residual_trace:
            if tag == ROW:
                assert row_res <= 1e-10
            else:
                assert tag == COL
                assert col_res <= 1e-10

    def test_convergence_leaves_both_marginals_tight(self):
        src, tgt = random_pair(1)
        C = cost_matrix(src, tgt)
        cfg = SinkhornConfig(regularization=0.2, marginal_tolerance=1e-9)
        report = sinkhorn_solve(C, src.masses, tgt.masses, cfg)
        assert report.converged
        row, col = marginal_residuals(report.plan, src.masses, tgt.masses)
        assert row <= 1e-12  # exact after the final row rescale
        assert col <= 1e-9

    def test_iteration_cap_respected(self):
        src, tgt = random_pair(2)
        C = cost_matrix(src, tgt)
        report = sinkhorn_solve(
            C, src.masses, tgt.masses, SinkhornConfig(regularization=0.01, max_iters=3)
        )
        assert not report.converged
        assert report.iterations == 3


class TestEntropicBias:
    def test_cost_dominates_exact_optimum(self):
        for seed in range(8):
            src, tgt = random_pair(seed)
            C = cost_matrix(src, tgt)
            exact = lp_solve(C, src.masses, tgt.masses)
            report = sinkhorn_solve(
                C, src.masses, tgt.masses, SinkhornConfig(regularization=0.5)
            )
            assert report.converged
            assert report.cost >= exact.cost - 1e-9

    def test_cost_decreases_toward_exact_as_reg_shrinks(self):
        src, tgt = random_pair(3)
        C = cost_matrix(src, tgt)
        exact = lp_solve(C, src.masses, tgt.masses)
        costs = []
        for reg in (2.0, 0.5, 0.1, 0.02):
            report = sinkhorn_solve(C, src.masses, tgt.masses, SinkhornConfig(regularization=reg))
            assert report.converged
            costs.append(report.cost)
        assert all(a >= b - 1e-9 for a, b in zip(costs, costs[1:]))
        assert costs[-1] == pytest.approx(exact.cost, abs=5e-3)

    def test_plan_has_full_support(self):
        src, tgt = random_pair(4)
        C = cost_matrix(src, tgt)
        report = sinkhorn_solve(C, src.masses, tgt.masses, SinkhornConfig(regularization=1.0))
        assert (report.plan.entries > 0).all()


class TestUnderflow:
    @staticmethod
    def distant_pair():
        rng = np.random.default_rng(5)
        src = DiscreteMeasure(rng.normal(0, 1, (20, 2)), np.full(20, 0.05))
        tgt = DiscreteMeasure(rng.normal(300, 1, (4, 2)) , np.full(4, 0.25))
        return src, tgt

    def test_tiny_reg_on_large_costs_fails_with_flag(self):
        src, tgt = self.distant_pair()
        C = cost_matrix(src, tgt)
        # exp(-C/reg) underflows to a zero kernel row, which the scaling
        # form cannot recover from
        report = sinkhorn_solve(C, src.masses, tgt.masses, SinkhornConfig(regularization=0.05))
        assert report.failed_zero_denominator
        assert not report.converged
        assert np.isfinite(report.plan.entries).all()
        assert np.isfinite(report.cost)

    def test_log_domain_survives_the_same_input(self):
        src, tgt = self.distant_pair()
        C = cost_matrix(src, tgt)
        cfg = SinkhornConfig(regularization=0.05, stabilized=True, max_iters=500)
        report = sinkhorn_solve(C, src.masses, tgt.masses, cfg)
        assert not report.failed_zero_denominator
        assert np.isfinite(report.plan.entries).all()
        row, col = marginal_residuals(report.plan, src.masses, tgt.masses)
        assert min(row, col) <= 1e-10

    def test_paths_agree_when_both_work(self):
        src, tgt = random_pair(6)
        C = cost_matrix(src, tgt)
        plain = sinkhorn_solve(C, src.masses, tgt.masses, SinkhornConfig(regularization=0.3))
        log = sinkhorn_solve(
            C, src.masses, tgt.masses, SinkhornConfig(regularization=0.3, stabilized=True)
        )
        assert plain.iterations == log.iterations
        assert np.allclose(plain.plan.entries, log.plan.entries, atol=1e-12)


class TestValidationAndEstimator:
    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            SinkhornConfig(regularization=0.0)
        with pytest.raises(ValueError):
            SinkhornConfig(max_iters=0)
        with pytest.raises(ValueError):
            SinkhornConfig(marginal_tolerance=-1e-8)

    def test_wrong_kind_rejected(self):
        from otkit.measures import INNER_PRODUCT

        M = KernelMatrix(np.array([[1.0]]), INNER_PRODUCT)
        with pytest.raises(ValueError):
            sinkhorn_solve(M, np.array([1.0]), np.array([1.0]))

    def test_estimator_fit_and_clone(self):
        rng = np.random.default_rng(7)
        Xs, Xt = rng.normal(size=(8, 2)), rng.normal(size=(5, 2))
        est = SinkhornTransport(reg=0.5, max_iters=2000).fit(Xs, Xt)
        assert est.coupling_.shape == (8, 5)
        assert est.converged_
        assert not est.failed_zero_denominator_
        params = est.get_params()
        assert params["reg"] == 0.5
        assert SinkhornTransport(**params).get_params() == params
