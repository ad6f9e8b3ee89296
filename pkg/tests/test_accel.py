import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.oracles import AugmentedOracle, ProxOracle, SmoothOracle
from src.core.vector_core import BoxSet, DenseMap
from src.problems.generators import gen_smooth_constrained, gen_two_block
from src.problems.models import SmoothSaddleProblem, SmoothTwoBlockProblem, TwoBlockProblem
from src.solvers.accel import (
    aadmm_initialize,
    aadmm_iterate,
    aadmm_solve,
    apdhg_initialize,
    apdhg_iterate,
    apdhg_solve,
)
from src.solvers.admm import admm_solve
from src.solvers.common import StoppingRule
from src.solvers.pdhg import pdhg_solve
from src.solvers.scheduler import SchedulerConfig, audit_conditions, check_invariants
from src.utils.errors import OracleUnavailableError


def test_linear_smooth_part_reduces_to_pdhg(bilinear_instance, sched):
    stop = StoppingRule(max_iters=200)
    base = pdhg_solve(bilinear_instance.saddle(), sched, stop)
    accel = apdhg_solve(bilinear_instance.smooth_saddle(), sched, stop)
    assert_allclose(accel.x_hat, base.x_hat, atol=1e-10)
    assert_allclose(accel.y_hat, base.y_hat, atol=1e-10)
    assert_allclose(accel.history.etas, base.history.etas, rtol=1e-10)
    assert accel.certificate.gap_bound == pytest.approx(base.certificate.gap_bound, rel=1e-10)


def test_linear_smooth_part_reduces_to_admm(rng, sched):
    K = DenseMap(rng.standard_normal((3, 4)))
    B = DenseMap(rng.standard_normal((3, 3)) + 3.0 * np.eye(3))
    G_aug = AugmentedOracle(ProxOracle.quadratic(np.ones(3), np.zeros(3), BoxSet.free(3)), B)
    X, q, b = BoxSet.cube(4), rng.standard_normal(4), rng.standard_normal(3)
    stop = StoppingRule(max_iters=200)
    base = admm_solve(TwoBlockProblem(ProxOracle.linear(q, X), G_aug, K, b), sched, stop)
    accel = aadmm_solve(SmoothTwoBlockProblem(SmoothOracle.linear(q), X, G_aug, K, b), sched, stop)
    assert_allclose(accel.history.etas, base.history.etas, rtol=1e-10)
    assert_allclose(accel.x_hat, base.x_hat, atol=1e-10)
    assert_allclose(accel.y_hat, base.y_hat, atol=1e-10)


def test_one_gradient_per_iteration(qp_instance, sched):
    report = apdhg_solve(qp_instance.smooth_saddle(), sched, StoppingRule(max_iters=40))
    assert report.grad_calls == 40
    assert report.trace[-1].grad_calls == 40
    assert report.trace[-1].L_smooth_t is not None
    assert report.trace[-1].tilde_tau_t == pytest.approx(report.trace[-1].tau_t / sched.mu_d)


def test_search_point_recursion(qp_instance, sched):
    solver = apdhg_initialize(qp_instance.smooth_saddle(), sched)
    for _ in range(25):
        solver.iterate()
        assert solver.search_point_residual() <= 1e-12 * (1.0 + np.linalg.norm(solver.xtilde))


def test_smooth_estimates_below_lipschitz():
    problem, truth = gen_smooth_constrained(6, 2, seed=4)
    report = apdhg_solve(problem, SchedulerConfig(mu_d=0.05), StoppingRule(max_iters=300))
    L = problem.f.lipschitz_reference()
    assert max(report.history.smooth_estimates) <= L * (1.0 + 1e-8)
    assert audit_conditions(report.history) == []
    assert check_invariants(report.history) == []
    cert = report.certificate
    assert cert.identity_residual <= 1e-9 * (1.0 + cert.violation)


def test_apdhg_constrained_report(qp_instance, sched):
    solver = apdhg_initialize(qp_instance.smooth_saddle(), sched)
    truth = qp_instance.truth
    for k in range(1, 301):
        solver.iterate()
        if k not in (3, 10, 100, 300):
            continue
        report = solver.constrained_report(truth.x_star, truth.y_star, truth.f_star)
        assert report.optimality_gap <= report.gap_rhs, k
        assert report.violation <= report.violation_rhs, k


def test_aadmm_runs_with_audits():
    problem, truth = gen_two_block(5, 3, 3, seed=11, smooth=True)
    config = SchedulerConfig(mu_d=0.05)
    report = aadmm_solve(problem, config, StoppingRule(max_iters=200))
    assert report.grad_calls == 200
    assert audit_conditions(report.history) == []
    assert check_invariants(report.history) == []
    assert report.certificate.identity_residual <= 1e-9 * (1.0 + report.certificate.violation)

    solver = aadmm_initialize(problem, config)
    for k in range(1, 201):
        solver.iterate()
        if k not in (3, 10, 100, 200):
            continue
        bounds = solver.constrained_report(truth.x_star, truth.y_star, truth.f_star)
        assert bounds.optimality_gap <= bounds.gap_rhs, k
        assert bounds.violation <= bounds.violation_rhs, k


def test_line_search_restores_gradient_count(qp_instance):
    config = SchedulerConfig(mu_d=0.05, eta1=50.0, initial_line_search=True)
    report = apdhg_solve(qp_instance.smooth_saddle(), config, StoppingRule(max_iters=10))
    assert report.certificate.line_search_halvings > 0
    assert report.grad_calls == 10


def test_non_evaluable_smooth_part_rejected():
    f = SmoothOracle.custom(2, lambda x: 0.0, lambda x: x, evaluable=False)
    X = BoxSet.cube(2)
    problem = SmoothSaddleProblem(f, X, ProxOracle.zero(BoxSet.cube(1)), DenseMap([[1.0, 1.0]]))
    with pytest.raises(OracleUnavailableError):
        apdhg_initialize(problem, SchedulerConfig(mu_d=0.1))


def test_stepping_matches_solve(qp_instance, sched):
    problem = qp_instance.smooth_saddle()
    solver = apdhg_initialize(problem, sched)
    for _ in range(30):
        solver = apdhg_iterate(solver)
    report = apdhg_solve(problem, sched, StoppingRule(max_iters=30))
    assert solver.grad_calls == report.grad_calls == 30
    assert_array_equal(solver.averages.x_hat(), report.x_hat)

    two_block, _ = gen_two_block(5, 3, 3, seed=11, smooth=True)
    solver = aadmm_initialize(two_block, sched)
    for _ in range(30):
        solver = aadmm_iterate(solver)
    report = aadmm_solve(two_block, sched, StoppingRule(max_iters=30))
    assert_array_equal(solver.averages.x_hat(), report.x_hat)
