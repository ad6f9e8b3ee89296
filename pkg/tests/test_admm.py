import pytest
from numpy.testing import assert_array_equal

from src.core.oracles import AugmentedOracle, ProxOracle
from src.core.vector_core import BoxSet, DenseMap
from src.problems.generators import gen_two_block
from src.problems.models import TwoBlockProblem
from src.solvers.admm import (
    admm_initialize,
    admm_iterate,
    admm_solve,
    b_scaling_invariance_check,
)
from src.solvers.common import StoppingRule
from src.solvers.scheduler import SchedulerConfig, audit_conditions, check_invariants


def test_dual_identity_each_iteration(two_block, sched):
    problem, _ = two_block
    solver = admm_initialize(problem, sched)
    for _ in range(30):
        solver.iterate()
        assert solver.dual_identity_residual() <= 1e-10
        assert solver.subproblem_residual() <= 1e-8


def test_averaged_identity_and_audits(two_block, sched):
    problem, _ = two_block
    report = admm_solve(problem, sched, StoppingRule(max_iters=300))
    cert = report.certificate
    assert cert.identity_residual <= 1e-9 * (1.0 + cert.violation)
    assert cert.E1 is not None and cert.E2 is not None
    assert audit_conditions(report.history) == []
    assert check_invariants(report.history) == []
    assert report.w_hat is not None


def test_constrained_report_within_bounds(two_block, sched):
    problem, truth = two_block
    solver = admm_initialize(problem, sched)
    for k in range(1, 301):
        solver.iterate()
        if k not in (3, 10, 100, 300):
            continue
        report = solver.constrained_report(truth.x_star, truth.y_star, truth.f_star)
        assert report.optimality_gap <= report.gap_rhs, k
        assert report.violation <= report.violation_rhs, k


def test_scalar_iterates_by_hand():
    G_aug = AugmentedOracle(ProxOracle.zero(BoxSet.cube(1, 0.25)), DenseMap([[1.0]]))
    problem = TwoBlockProblem(
        ProxOracle.zero(BoxSet.cube(1)), G_aug, DenseMap([[1.0]]), [0.0], x0=[0.5]
    )
    config = SchedulerConfig(mu_d=1.0, beta=0.1, alpha=0.5, eta1=0.5)
    solver = admm_initialize(problem, config)
    assert (solver.w[0], solver.y[0]) == pytest.approx((0.25, 0.25))

    solver.iterate()
    assert (solver.x[0], solver.w[0], solver.y[0]) == pytest.approx((0.375, 0.25, 0.125))
    assert solver.scheduler.etas == pytest.approx([0.5, 0.25])
    assert solver.scheduler.taus == pytest.approx([0.0, 1.0])

    solver.iterate()
    assert (solver.x[0], solver.xbar[0]) == pytest.approx((0.46875, 0.496875))
    assert (solver.w[0], solver.y[0]) == pytest.approx((0.25, 0.171875))
    assert solver.dual_identity_residual() == pytest.approx(0.0, abs=1e-15)
    assert solver.scheduler.etas == pytest.approx([0.5, 0.25, 0.25])
    assert solver.scheduler.taus == pytest.approx([0.0, 1.0, 1.5])
    assert solver.averages.x_hat()[0] == pytest.approx(0.421875)
    assert solver.averages.w_hat()[0] == pytest.approx(0.25)


@pytest.mark.parametrize("b_kind", ["dense", "diagonal"])
def test_stepsizes_ignore_scale_of_b(b_kind):
    problem, _ = gen_two_block(4, 3, 3, seed=2, b_kind=b_kind)
    result = b_scaling_invariance_check(problem, SchedulerConfig(mu_d=0.1), c=100.0, iters=50)
    assert result["max_deviation"] <= 1e-7
    assert result["deviations"]["etas"] <= 1e-12


def test_scaling_check_rejects_bad_scale(two_block, sched):
    problem, _ = two_block
    with pytest.raises(ValueError):
        b_scaling_invariance_check(problem, sched, c=0.0)


def test_stepping_matches_solve(two_block, sched):
    problem, _ = two_block
    solver = admm_initialize(problem, sched)
    for _ in range(40):
        solver = admm_iterate(solver)
    report = admm_solve(problem, sched, StoppingRule(max_iters=40))
    assert solver.t == 40
    assert_array_equal(solver.averages.x_hat(), report.x_hat)
