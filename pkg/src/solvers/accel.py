"""
Accelerated auto-conditioned methods for smooth primal parts: AC-APDHG and AC-AADMM.

Both keep an extra search sequence ``x_tilde`` at which the gradient is
evaluated once per iteration; the cached gradient feeds the next x-step
and the local smoothness estimate.
"""

from typing import Tuple

import numpy as np

from ..core.estimators import bregman_ratio, secant_ratio
from ..core.oracles import ProxOracle, SmoothOracle
from ..core.vector_core import TINY_NORM, BoxSet, RealVector
from ..problems.models import SmoothSaddleProblem, SmoothTwoBlockProblem
from ..utils.errors import OracleUnavailableError
from .admm import AdmmSolver
from .common import SolveReport, StoppingRule
from .pdhg import PdhgSolver
from .scheduler import SchedulerConfig


class SmoothPrimalMixin:
    """x-step, search sequence and gradient cache shared by both accelerated solvers."""

    accelerated = True
    smooth = True

    def _smooth_start(self, f: SmoothOracle, X: BoxSet) -> None:
        if not f.evaluable:
            raise OracleUnavailableError(
                "accelerated solvers need function values of the smooth part"
            )
        self._box = ProxOracle.indicator(X)
        self.xtilde = self.x0.copy()
        self.value_tilde, self.grad_tilde = f.value_and_grad(self.xtilde)
        self.probe_x = self.rng.standard_normal(f.dim)

    def _smooth_seed(self, f: SmoothOracle) -> float:
        """Secant smoothness between x0 and x0 shifted by the unit probe."""
        nrm = float(np.linalg.norm(self.probe_x))
        if nrm <= TINY_NORM:
            return 0.0
        shifted = self.x0 + self.probe_x / nrm
        return secant_ratio(shifted, self.x0, f.grad(shifted), self.grad_tilde)

    def _smooth_x_step(
        self, f: SmoothOracle, dual_linear: RealVector, t: int, eta: float, tau: float
    ) -> float:
        self.x = self._box.prox(dual_linear + self.grad_tilde, self.xbar, eta)
        tilde_tau = tau / self.config.mu_d
        xtilde = (self.x + tilde_tau * self.xtilde) / (1.0 + tilde_tau)
        value, grad = f.value_and_grad(xtilde)
        self.grad_calls += 1
        if t == 1:
            L_smooth = secant_ratio(xtilde, self.xtilde, grad, self.grad_tilde)
        else:
            L_smooth = bregman_ratio(
                xtilde, self.xtilde, value, self.value_tilde, grad, self.grad_tilde
            )
        self.xtilde_prev = self.xtilde
        self.xtilde, self.value_tilde, self.grad_tilde = xtilde, value, grad
        return L_smooth

    def search_point_residual(self) -> float:
        """``||x_tilde_t (1 + tilde_tau_t) - x_t - tilde_tau_t x_tilde_{t-1}||``."""
        tilde_tau = self.scheduler.tilde_taus[self.t - 1]
        lhs = self.xtilde * (1.0 + tilde_tau) - self.x - tilde_tau * self.xtilde_prev
        return float(np.linalg.norm(lhs))


class ApdhgSolver(SmoothPrimalMixin, PdhgSolver):
    """AC-APDHG on ``min_{x in X} max_y f(x) + <A x, y> - g(y)`` with smooth f."""

    algorithm = "ac-apdhg"
    _state_fields = ("x", "xbar", "xtilde", "grad_tilde", "value_tilde", "y", "y_prev")

    def _start(self) -> None:
        super()._start()
        self._smooth_start(self.problem.f, self.problem.X)

    def _seed_curvature(self) -> Tuple[float, float]:
        op0, _ = super()._seed_curvature()
        return op0, self._smooth_seed(self.problem.f)

    def _primal_prox(self, eta: float) -> RealVector:
        return self._box.prox(self.problem.A.adjoint(self.y) + self.grad_tilde, self.xbar, eta)

    def _x_step(self, t: int, eta: float, tau: float) -> float:
        p = self.problem
        return self._smooth_x_step(p.f, p.A.adjoint(self.y), t, eta, tau)


class AadmmSolver(SmoothPrimalMixin, AdmmSolver):
    """AC-AADMM on ``min F(x) + G(w)  s.t.  B w - K x = b`` with smooth F over X."""

    algorithm = "ac-aadmm"
    _state_fields = ("x", "xbar", "xtilde", "grad_tilde", "value_tilde", "w", "y", "y_prev")

    def _start(self) -> None:
        super()._start()
        self._smooth_start(self.problem.F, self.problem.X)

    def _seed_curvature(self) -> Tuple[float, float]:
        op0, _ = super()._seed_curvature()
        return op0, self._smooth_seed(self.problem.F)

    def _x_step(self, t: int, eta: float, tau: float) -> float:
        p = self.problem
        return self._smooth_x_step(p.F, p.K.adjoint(self.y), t, eta, tau)


def apdhg_initialize(
    problem: SmoothSaddleProblem, config: SchedulerConfig, probe_seed: int = 0
) -> ApdhgSolver:
    return ApdhgSolver(problem, config, probe_seed).initialize()


def apdhg_iterate(state: ApdhgSolver) -> ApdhgSolver:
    return state.iterate()


def apdhg_solve(
    problem: SmoothSaddleProblem,
    config: SchedulerConfig,
    stop: StoppingRule,
    probe_seed: int = 0,
) -> SolveReport:
    """Run AC-APDHG until ``stop`` fires."""
    return apdhg_initialize(problem, config, probe_seed).solve(stop)


def aadmm_initialize(
    problem: SmoothTwoBlockProblem, config: SchedulerConfig, probe_seed: int = 0
) -> AadmmSolver:
    return AadmmSolver(problem, config, probe_seed).initialize()


def aadmm_iterate(state: AadmmSolver) -> AadmmSolver:
    return state.iterate()


def aadmm_solve(
    problem: SmoothTwoBlockProblem,
    config: SchedulerConfig,
    stop: StoppingRule,
    probe_seed: int = 0,
) -> SolveReport:
    """Run AC-AADMM until ``stop`` fires."""
    return aadmm_initialize(problem, config, probe_seed).solve(stop)
