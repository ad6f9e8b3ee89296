"""AC-PDHG: auto-conditioned primal-dual hybrid gradient for saddle problems."""

from typing import Optional, Tuple

import numpy as np

from ..core.estimators import local_op_norm, seed_op_norm
from ..core.oracles import dual_prox
from ..core.vector_core import RealVector
from ..problems.models import SaddleProblem
from ..utils.errors import SolverError
from .common import FIRST_REPORT, PrimalDualSolver, SolveReport, StoppingRule, rate_denominator
from .scheduler import SchedulerConfig


class PdhgSolver(PrimalDualSolver):
    """
    AC-PDHG on ``min_x max_y f(x) + <A x, y> - g(y)``.

    The dual step is smoothed by ``mu_d/2 ||y_tilde0 - y||^2``; in
    constrained mode ``y_tilde0`` is forced to zero.
    """

    algorithm = "ac-pdhg"

    def __init__(self, problem: SaddleProblem, config: SchedulerConfig, probe_seed: int = 0):
        super().__init__(problem, config, probe_seed)
        self.y_tilde0 = problem.y_tilde0
        if problem.is_constrained and np.any(self.y_tilde0 != 0.0):
            self.logger.warning("constrained mode: ignoring the supplied y_tilde0, using 0")
            self.y_tilde0 = np.zeros(problem.A.rows)

    def _start(self) -> None:
        p = self.problem
        self.x0 = p.x0.copy()
        self.x = self.x0.copy()
        self.xbar = self.x0.copy()
        self.y = dual_prox(
            p.g, -p.A.forward(self.x0), self.y_tilde0, self.config.mu_d, 0.0, self.y_tilde0
        )
        self.y_prev = self.y.copy()
        self.probe_y = self.rng.standard_normal(p.A.rows)

    def _seed_curvature(self) -> Tuple[float, float]:
        return seed_op_norm(self.problem.A, self.y_tilde0, self.y, self.probe_y), 0.0

    def _primal_prox(self, eta: float) -> RealVector:
        p = self.problem
        return p.f.prox(p.A.adjoint(self.y), self.xbar, eta)

    def _x_step(self, t: int, eta: float, tau: float) -> float:
        self.x = self._primal_prox(eta)
        return 0.0

    def _step(self, t: int, eta: float, tau: float) -> Tuple[float, float]:
        p = self.problem
        beta = self.config.beta
        L_smooth = self._x_step(t, eta, tau)
        if t >= 2:
            self.xbar = (1.0 - beta) * self.xbar + beta * self.x
        self.y_prev = self.y
        self.y = dual_prox(
            p.g, -p.A.forward(self.x), self.y_tilde0, self.config.mu_d, tau, self.y_prev
        )
        return local_op_norm(p.A, self.y, self.y_prev), L_smooth

    def constraint_residual(self) -> Optional[RealVector]:
        if not self.problem.is_constrained:
            return None
        return self.problem.A.forward(self.averages.x_hat()) - self.problem.b

    def primal_domain_radius(self) -> float:
        return self.problem.X.radius_from(self.x0)

    def dual_domain_radius(self) -> float:
        return self.problem.Y.radius_from(self.y_tilde0)

    def lookahead_center(self) -> RealVector:
        """The prox-center the next iteration would produce, without moving the state."""
        beta = self.config.beta
        x_next = self._primal_prox(self.scheduler.eta)
        return (1.0 - beta) * self.xbar + beta * x_next

    def unbounded_diagnostics(self) -> Tuple[RealVector, RealVector]:
        """
        Perturbation vectors certifying the averaged iterate on unbounded domains.

        Returns:
            ``delta_x = 24 C / c_k (xbar_{k+1} - x0)`` and
            ``delta_y = mu_d (y_tilde0 - y_tilde_k)``
        """
        k = self.t
        if k < FIRST_REPORT:
            raise SolverError(f"unbounded diagnostics need k >= {FIRST_REPORT}, got {k}")
        scale = 24.0 * self.curvature() / rate_denominator(k, self.config.alpha)
        delta_x = scale * (self.lookahead_center() - self.x0)
        delta_y = self.config.mu_d * (self.y_tilde0 - self.averages.y_tilde())
        self.logger.info(
            f"k={k}: ||delta_x||={np.linalg.norm(delta_x):.6g}, "
            f"||delta_y||={np.linalg.norm(delta_y):.6g}"
        )
        return delta_x, delta_y


def pdhg_initialize(
    problem: SaddleProblem, config: SchedulerConfig, probe_seed: int = 0
) -> PdhgSolver:
    """Build a solver with y0 computed and eta1 fixed."""
    return PdhgSolver(problem, config, probe_seed).initialize()


def pdhg_iterate(state: PdhgSolver) -> PdhgSolver:
    return state.iterate()


def pdhg_solve(
    problem: SaddleProblem, config: SchedulerConfig, stop: StoppingRule, probe_seed: int = 0
) -> SolveReport:
    """Run AC-PDHG until ``stop`` fires."""
    return pdhg_initialize(problem, config, probe_seed).solve(stop)


def unbounded_diagnostics(state: PdhgSolver) -> Tuple[RealVector, RealVector]:
    return state.unbounded_diagnostics()

