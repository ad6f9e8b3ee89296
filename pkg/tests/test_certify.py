import numpy as np
import pytest

from src.core.oracles import ProxOracle, SmoothOracle
from src.core.vector_core import BoxSet, DenseMap
from src.problems.generators import gen_box_bilinear
from src.problems.models import SaddleProblem, SmoothSaddleProblem
from src.solvers.certify import (
    GuessCheckConfig,
    error_bounds,
    gap_at,
    gap_sup_box,
    gap_sup_grid,
    guess_and_check_admm,
    guess_and_check_pdhg,
)
from src.solvers.common import error_bound_values
from src.solvers.scheduler import SchedulerConfig
from src.utils.errors import ConfigError, GuessCheckError


def test_gap_vanishes_on_the_diagonal(bilinear_instance, two_block, rng):
    problem = bilinear_instance.saddle()
    z = (problem.X.project(rng.standard_normal(4)), problem.Y.project(rng.standard_normal(3)))
    assert gap_at(z, z, problem) == pytest.approx(0.0, abs=1e-12)

    tb, truth = two_block
    z = (truth.x_star, truth.w_star, truth.y_star)
    assert gap_at(z, z, tb) == pytest.approx(0.0, abs=1e-12)


def test_sup_gap_is_zero_at_planted_saddle(bilinear_instance):
    truth = bilinear_instance.truth
    gap = gap_sup_box((truth.x_star, truth.y_star), bilinear_instance.saddle())
    assert gap == pytest.approx(0.0, abs=1e-12)


def test_sup_gap_dominates_pointwise_gap(bilinear_instance, rng):
    problem = bilinear_instance.saddle()
    z_bar = (problem.X.project(rng.standard_normal(4)), problem.Y.project(rng.standard_normal(3)))
    sup = gap_sup_box(z_bar, problem)
    for _ in range(20):
        z = (rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 3))
        assert gap_at(z_bar, z, problem) <= sup + 1e-12


def test_box_sup_matches_grid_sup():
    problem = gen_box_bilinear(2, 2, seed=9).saddle()
    z_bar = (np.array([0.3, -0.7]), np.array([0.1, 0.9]))
    assert gap_sup_box(z_bar, problem) == pytest.approx(gap_sup_grid(z_bar, problem), abs=1e-9)


def test_smooth_sup_matches_grid_sup():
    P = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = SmoothOracle.quadratic(P, [0.3, -0.2])
    g = ProxOracle.quadratic([1.0], [0.1], BoxSet.cube(1))
    problem = SmoothSaddleProblem(f, BoxSet.cube(2), g, DenseMap([[1.0, -2.0]]))
    z_bar = (np.array([0.2, 0.4]), np.array([-0.5]))
    expected = gap_sup_grid(z_bar, problem, rel_step=1e-4)
    assert gap_sup_box(z_bar, problem) == pytest.approx(expected, abs=1e-5)


def test_scalar_gap_by_hand():
    unit = BoxSet.cube(1)
    problem = SaddleProblem(
        ProxOracle.linear([2.0], unit), ProxOracle.l1([0.5], unit), DenseMap([[3.0]])
    )
    z_bar = (np.array([0.5]), np.array([-0.2]))
    assert gap_at(z_bar, (np.array([-1.0]), np.array([0.4])), problem) == pytest.approx(2.9)
    assert gap_at(z_bar, (np.array([-1.0]), np.array([1.0])), problem) == pytest.approx(3.5)
    assert gap_sup_box(z_bar, problem) == pytest.approx(3.5)


def test_error_bounds():
    e1, e2 = error_bounds(10, 2.0, 0.5, 0.1, 0.5, 3.0)
    assert (e1, e2) == error_bound_values(10, 8.0, 0.5, 0.1, 0.5, 3.0)
    ck = 60.0 + 0.5 * 10 * 7
    assert e1 == pytest.approx(12 * 8.0 * 9.0 / (0.1 * ck))
    assert e2 == pytest.approx(4.0 * np.sqrt(0.5 * e1))
    assert error_bounds(10, 8.0, 0.5, 0.1, 0.5, 3.0, accelerated=True) == (e1, e2)
    with pytest.raises(ValueError):
        error_bounds(2, 1.0, 1.0, 0.1, 0.5, 1.0)


class TestGuessAndCheck:
    def test_pdhg_terminates(self, qp_instance):
        problem = qp_instance.saddle()
        D_X = problem.X.radius_from(problem.x0)
        gc = GuessCheckConfig(D_hat0=1.0, eps1=1.0, eps2=0.1, D_X=D_X)
        result = guess_and_check_pdhg(problem, gc, SchedulerConfig(mu_d=1.0))
        assert 1 <= result.outer_count <= 4
        assert result.report.certificate.violation <= 0.1
        assert result.report.certificate.E1 <= 1.0
        assert result.D_hat_Y == 2.0 ** (result.outer_count - 1)
        assert [r.i for r in result.rounds] == list(range(result.outer_count))
        assert result.rounds[0].mu_d == pytest.approx(0.1 / 4.0)

    def test_admm_terminates(self, two_block):
        problem, _ = two_block
        D_X = problem.X.radius_from(problem.x0)
        gc = GuessCheckConfig(D_hat0=1.0, eps1=1.0, eps2=0.1, D_X=D_X)
        result = guess_and_check_admm(problem, gc, SchedulerConfig(mu_d=1.0))
        assert result.report.certificate.violation <= 0.1
        assert result.to_dict()["D_hat_Y"] == result.D_hat_Y

    def test_pdhg_recovers_from_small_radius_guess(self, qp_instance):
        problem, truth = qp_instance.saddle(), qp_instance.truth
        y_norm = float(np.linalg.norm(truth.y_star))
        D_X = problem.X.radius_from(problem.x0)
        gc = GuessCheckConfig(D_hat0=y_norm / 8.0, eps1=1e-2, eps2=1e-2, D_X=D_X)
        result = guess_and_check_pdhg(problem, gc, SchedulerConfig(mu_d=1.0))
        assert result.outer_count <= 4
        assert result.D_hat_Y <= 2.0 * max(y_norm, gc.D_hat0)
        report = result.report
        assert report.certificate.violation <= 1e-2
        assert problem.objective(report.x_hat) - truth.f_star <= 1e-2

    def test_admm_recovers_from_small_radius_guess(self, two_block):
        problem, truth = two_block
        y_norm = float(np.linalg.norm(truth.y_star))
        D_X = problem.X.radius_from(problem.x0)
        gc = GuessCheckConfig(D_hat0=y_norm / 8.0, eps1=1e-2, eps2=1e-2, D_X=D_X)
        result = guess_and_check_admm(problem, gc, SchedulerConfig(mu_d=1.0))
        assert result.outer_count <= 4
        assert result.D_hat_Y <= 2.0 * max(y_norm, gc.D_hat0)
        report = result.report
        assert report.certificate.violation <= 1e-2
        assert problem.objective(report.x_hat, report.w_hat) - truth.f_star <= 1e-2

    def test_unconstrained_problem_rejected(self, bilinear_instance):
        gc = GuessCheckConfig(D_hat0=1.0, eps1=1.0, eps2=0.1, D_X=2.0)
        with pytest.raises(ConfigError):
            guess_and_check_pdhg(bilinear_instance.saddle(), gc, SchedulerConfig(mu_d=1.0))

    def test_inner_budget_exhausted(self, qp_instance):
        gc = GuessCheckConfig(D_hat0=1.0, eps1=1e-12, eps2=1e-12, D_X=3.0, max_inner=5)
        with pytest.raises(GuessCheckError) as info:
            guess_and_check_pdhg(qp_instance.saddle(), gc, SchedulerConfig(mu_d=1.0))
        assert len(info.value.diagnostics["rounds"]) == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"D_hat0": 0.0},
            {"eps1": -1.0},
            {"D_X": float("inf")},
            {"max_inner": 2},
        ],
    )
    def test_config_validation(self, kwargs):
        base = {"D_hat0": 1.0, "eps1": 1.0, "eps2": 1.0, "D_X": 1.0}
        with pytest.raises(ConfigError):
            GuessCheckConfig(**dict(base, **kwargs))
