import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.oracles import ProxOracle
from src.core.vector_core import BoxSet, DenseMap, spectral_norm_reference
from src.problems.generators import gen_box_bilinear, gen_lasso
from src.problems.models import SaddleProblem
from src.solvers.certify import gap_sup_box
from src.solvers.common import StoppingRule
from src.solvers.pdhg import PdhgSolver, pdhg_initialize, pdhg_iterate, pdhg_solve
from src.solvers.scheduler import SchedulerConfig, audit_conditions, check_invariants
from src.utils.errors import SolverError


def test_dual_average_identity(qp_instance, sched):
    report = pdhg_solve(qp_instance.saddle(), sched, StoppingRule(max_iters=200))
    cert = report.certificate
    assert cert.identity_residual <= 1e-9 * (1.0 + cert.violation)
    assert cert.violation == pytest.approx(cert.dual_residual, rel=1e-8, abs=1e-12)


def test_history_passes_audits(qp_instance, sched):
    report = pdhg_solve(qp_instance.saddle(), sched, StoppingRule(max_iters=300))
    assert audit_conditions(report.history) == []
    assert check_invariants(report.history) == []


def test_operator_estimates_below_norm(bilinear_instance, sched):
    problem = bilinear_instance.saddle()
    report = pdhg_solve(problem, sched, StoppingRule(max_iters=200))
    norm = spectral_norm_reference(problem.A, iters=2000)
    assert max(report.history.op_estimates) <= norm * (1.0 + 1e-9)


def test_constrained_report_within_bounds(qp_instance, sched):
    solver = pdhg_initialize(qp_instance.saddle(), sched)
    truth = qp_instance.truth
    for k in range(1, 401):
        solver.iterate()
        if k not in (3, 10, 100, 400):
            continue
        report = solver.constrained_report(truth.x_star, truth.y_star, truth.f_star)
        assert report.optimality_gap <= report.gap_rhs, k
        assert report.violation <= report.violation_rhs, k
        assert report.mu_ytilde_norm == pytest.approx(report.violation, rel=1e-8, abs=1e-12)


def test_constrained_report_needs_three_iterations(qp_instance, sched):
    solver = pdhg_initialize(qp_instance.saddle(), sched)
    solver.iterate().iterate()
    with pytest.raises(SolverError):
        solver.constrained_report(qp_instance.truth.x_star, qp_instance.truth.y_star)


@pytest.mark.parametrize("seed", range(10))
def test_sup_gap_below_certified_bound(seed):
    problem = gen_box_bilinear(8, 8, seed=seed).saddle()
    D_Y = problem.Y.radius_from(problem.y_tilde0)
    solver = pdhg_initialize(problem, SchedulerConfig.from_target(1e-2, D_Y))
    for k in range(1, 501):
        solver.iterate()
        if k not in (3, 10, 50, 200, 500):
            continue
        bound = solver.certificate().gap_bound
        assert bound is not None
        z_hat = (solver.averages.x_hat(), solver.averages.y_hat())
        gap = gap_sup_box(z_hat, problem)
        assert -1e-10 <= gap <= bound + 1e-9, k


def test_gap_decays_between_200_and_400(bilinear_instance):
    problem = bilinear_instance.saddle()
    solver = pdhg_initialize(problem, SchedulerConfig(mu_d=0.01))
    gaps = {}
    for k in range(1, 401):
        solver.iterate()
        if k in (200, 400):
            gaps[k] = gap_sup_box((solver.averages.x_hat(), solver.averages.y_hat()), problem)
    assert gaps[400] <= 0.35 * gaps[200]


def test_scalar_iterates_by_hand():
    unit = BoxSet.cube(1)
    problem = SaddleProblem(
        ProxOracle.zero(unit), ProxOracle.zero(unit), DenseMap([[1.0]]), x0=[0.5]
    )
    config = SchedulerConfig(mu_d=1.0, beta=0.1, alpha=0.5, eta1=0.5)
    solver = pdhg_initialize(problem, config)
    assert solver.y[0] == pytest.approx(0.5)

    solver.iterate()
    assert (solver.x[0], solver.xbar[0], solver.y[0]) == pytest.approx((0.25, 0.5, 0.25))
    assert solver.scheduler.etas == pytest.approx([0.5, 0.25])
    assert solver.scheduler.taus == pytest.approx([0.0, 1.0])

    solver.iterate()
    assert (solver.x[0], solver.xbar[0], solver.y[0]) == pytest.approx((0.4375, 0.49375, 0.34375))
    assert solver.scheduler.etas == pytest.approx([0.5, 0.25, 0.25])
    assert solver.scheduler.taus == pytest.approx([0.0, 1.0, 1.5])
    assert solver.averages.x_hat()[0] == pytest.approx(0.34375)
    assert solver.averages.y_hat()[0] == pytest.approx(0.296875)
    assert solver.averages.y_tilde()[0] == pytest.approx(0.34375)


def test_trace_stride_default():
    instance = gen_lasso(6, 8, seed=3)
    report = pdhg_solve(instance.saddle(), SchedulerConfig(mu_d=0.1), StoppingRule(max_iters=1500))
    assert len(report.trace) == 150
    assert [r.t for r in report.trace[:2]] == [10, 20]
    assert report.trace[-1].t == 1500
    assert report.certificate.gap_bound is None


def test_explicit_stride_keeps_final_row(qp_instance, sched):
    report = pdhg_solve(qp_instance.saddle(), sched, StoppingRule(max_iters=25, trace_stride=10))
    assert [r.t for r in report.trace] == [10, 20, 25]
    assert report.trace[0].bound is not None


def test_runs_are_deterministic(qp_instance, sched):
    first = pdhg_solve(qp_instance.saddle(), sched, StoppingRule(max_iters=100))
    second = pdhg_solve(qp_instance.saddle(), sched, StoppingRule(max_iters=100))
    assert first.history.etas == second.history.etas
    assert_array_equal(first.x_hat, second.x_hat)


def test_gap_target_stops_early(bilinear_instance):
    stop = StoppingRule(max_iters=100000, gap_target=0.5)
    report = pdhg_solve(bilinear_instance.saddle(), SchedulerConfig(mu_d=0.01), stop)
    assert report.status == "gap_target"
    assert report.certificate.gap_bound <= 0.5
    assert report.iterations < 100000


def test_unbounded_diagnostics_on_lasso():
    instance = gen_lasso(6, 8, seed=3)
    solver = pdhg_initialize(instance.saddle(), SchedulerConfig(mu_d=0.1))
    with pytest.raises(SolverError):
        solver.unbounded_diagnostics()
    for _ in range(50):
        solver.iterate()
    delta_x, delta_y = solver.unbounded_diagnostics()
    assert delta_x.shape == (6,)
    assert delta_y.shape == (8,)
    assert np.all(np.isfinite(delta_x))


def test_unbounded_diagnostics_shrink(qp_instance, sched):
    problem = qp_instance.saddle()
    solver = pdhg_initialize(problem, sched)
    norms = {}
    for k in range(1, 401):
        solver.iterate()
        if k in (100, 400):
            delta_x, delta_y = solver.unbounded_diagnostics()
            norms[k] = np.linalg.norm(delta_x)
            expected_y = sched.mu_d * (problem.y_tilde0 - solver.averages.y_tilde())
            assert_allclose(delta_y, expected_y, atol=1e-15)
    assert norms[400] <= norms[100]


def test_unbounded_diagnostics_vanish_at_rest():
    box = BoxSet.cube(2)
    problem = SaddleProblem(
        ProxOracle.zero(box),
        ProxOracle.zero(box),
        DenseMap(np.zeros((2, 2))),
        x0=[0.5, -0.25],
        y_tilde0=[0.3, -0.2],
    )
    solver = pdhg_initialize(problem, SchedulerConfig(mu_d=0.5, eta1=1.0))
    for _ in range(3):
        solver.iterate()
    assert_allclose(solver.xbar, problem.x0, atol=1e-15)
    delta_x, delta_y = solver.unbounded_diagnostics()
    assert_allclose(delta_x, 0.0, atol=1e-14)
    assert_allclose(delta_y, 0.0, atol=1e-14)


def test_iterate_before_initialize(qp_instance, sched):
    with pytest.raises(SolverError):
        PdhgSolver(qp_instance.saddle(), sched).iterate()


def test_line_search_recorded(qp_instance):
    config = SchedulerConfig(mu_d=0.05, eta1=100.0, initial_line_search=True)
    report = pdhg_solve(qp_instance.saddle(), config, StoppingRule(max_iters=20))
    assert report.certificate.line_search_halvings > 0
    assert report.certificate.eta1 < 100.0


def test_stepping_matches_solve(qp_instance, sched):
    problem = qp_instance.saddle()
    solver = pdhg_initialize(problem, sched)
    for _ in range(50):
        solver = pdhg_iterate(solver)
    report = pdhg_solve(problem, sched, StoppingRule(max_iters=50))
    assert solver.t == 50
    assert_array_equal(solver.averages.x_hat(), report.x_hat)
