"""AC-ADMM: auto-conditioned ADMM whose stepsizes depend on K alone."""

from typing import Any, Dict, List, Optional, Tuple, Type

import numpy as np

from ..core.estimators import local_op_norm, seed_op_norm
from ..core.vector_core import RealVector
from ..problems.models import TwoBlockProblem
from .common import PrimalDualSolver, SolveReport, StoppingRule
from .scheduler import SchedulerConfig


class AdmmSolver(PrimalDualSolver):
    """
    AC-ADMM on ``min F(x) + G(w)  s.t.  B w - K x = b``.

    The w-step is the augmented subproblem with penalty ``1/(tau_t + mu_d)``
    and target ``K x_t + b + tau_t y_{t-1}``; y follows in closed form.
    """

    algorithm = "ac-admm"
    two_block = True
    _state_fields = ("x", "xbar", "w", "y", "y_prev")

    def __init__(self, problem: TwoBlockProblem, config: SchedulerConfig, probe_seed: int = 0):
        super().__init__(problem, config, probe_seed)
        self._target: Optional[RealVector] = None
        self._rho = config.mu_d

    def _start(self) -> None:
        p = self.problem
        mu = self.config.mu_d
        self.x0 = p.x0.copy()
        self.x = self.x0.copy()
        self.xbar = self.x0.copy()
        target = p.K.forward(self.x0) + p.b
        self.w = p.G_aug.solve(mu, target)
        self.y = (target - p.G_aug.B.forward(self.w)) / mu
        self.y_prev = self.y.copy()
        self._target, self._rho = target, mu
        self.probe_y = self.rng.standard_normal(p.K.rows)

    def _seed_curvature(self) -> Tuple[float, float]:
        zero = np.zeros(self.problem.K.rows)
        return seed_op_norm(self.problem.K, zero, self.y, self.probe_y), 0.0

    def _x_step(self, t: int, eta: float, tau: float) -> float:
        p = self.problem
        self.x = p.F.prox(p.K.adjoint(self.y), self.xbar, eta)
        return 0.0

    def _step(self, t: int, eta: float, tau: float) -> Tuple[float, float]:
        p = self.problem
        L_smooth = self._x_step(t, eta, tau)
        if t >= 2:
            beta = self.config.beta
            self.xbar = (1.0 - beta) * self.xbar + beta * self.x
        rho = tau + self.config.mu_d
        target = p.K.forward(self.x) + p.b + tau * self.y
        self.w = p.G_aug.solve(rho, target)
        self.y_prev = self.y
        self.y = (target - p.G_aug.B.forward(self.w)) / rho
        self._target, self._rho = target, rho
        return local_op_norm(p.K, self.y, self.y_prev), L_smooth

    def _stage_average(self, tau: float) -> None:
        self.averages.stage(self.x, self.y, self.y_prev, tau, self.w)

    def subproblem_residual(self) -> Optional[float]:
        if self._target is None:
            return None
        return self.problem.G_aug.optimality_residual(self.w, self._rho, self._target)

    def dual_identity_residual(self) -> float:
        """``||(tau_t + mu_d) y_t - tau_t y_{t-1} + (B w_t - K x_t - b)||`` after iteration t."""
        p = self.problem
        tau = self.scheduler.taus[self.t - 1]
        lhs = (tau + self.config.mu_d) * self.y - tau * self.y_prev
        lhs = lhs + p.G_aug.B.forward(self.w) - p.K.forward(self.x) - p.b
        return float(np.linalg.norm(lhs))

    def constraint_residual(self) -> Optional[RealVector]:
        p = self.problem
        x_hat, w_hat = self.averages.x_hat(), self.averages.w_hat()
        return p.K.forward(x_hat) - p.G_aug.B.forward(w_hat) + p.b

    def averaged_objective(self) -> float:
        return self.problem.objective(self.averages.x_hat(), self.averages.w_hat())

    def primal_domain_radius(self) -> float:
        return self.problem.X.radius_from(self.x0)

    def dual_domain_radius(self) -> float:
        return float("inf")


def admm_initialize(
    problem: TwoBlockProblem, config: SchedulerConfig, probe_seed: int = 0
) -> AdmmSolver:
    """Build a solver with (w0, y0) computed and eta1 fixed."""
    return AdmmSolver(problem, config, probe_seed).initialize()


def admm_iterate(state: AdmmSolver) -> AdmmSolver:
    return state.iterate()


def admm_solve(
    problem: TwoBlockProblem, config: SchedulerConfig, stop: StoppingRule, probe_seed: int = 0
) -> SolveReport:
    return admm_initialize(problem, config, probe_seed).solve(stop)


def _trajectory(solver: AdmmSolver, iters: int) -> Dict[str, List[np.ndarray]]:
    paths: Dict[str, List[np.ndarray]] = {"x": [], "y": [], "Bw": []}
    B = solver.problem.G_aug.B
    for _ in range(iters):
        solver.iterate()
        paths["x"].append(solver.x.copy())
        paths["y"].append(solver.y.copy())
        paths["Bw"].append(B.forward(solver.w))
    return paths


def b_scaling_invariance_check(
    problem: Any,
    config: SchedulerConfig,
    c: float,
    iters: int = 50,
    probe_seed: int = 0,
    solver_cls: Type[AdmmSolver] = AdmmSolver,
) -> Dict[str, Any]:
    """
    Run the problem and its reparameterization ``B -> cB, G -> G(c .)`` side by side.

    Returns:
        Report with the maximum absolute deviation of each sequence that
        must not depend on the scale of B

    Raises:
        ValueError: If ``c`` is not positive
        OracleUnavailableError: If G is not closed under input scaling
    """
    if c <= 0.0:
        raise ValueError(f"scale must be positive, got {c}")
    scaled = problem.rescaled(c)
    first = solver_cls(problem, config, probe_seed).initialize()
    second = solver_cls(scaled, config, probe_seed).initialize()
    paths_a = _trajectory(first, iters)
    paths_b = _trajectory(second, iters)

    deviations: Dict[str, float] = {}
    for name in paths_a:
        gaps = [np.max(np.abs(a - b), initial=0.0) for a, b in zip(paths_a[name], paths_b[name])]
        deviations[name] = float(max(gaps, default=0.0))
    hist_a, hist_b = first.scheduler.snapshot(), second.scheduler.snapshot()
    for name in ("etas", "taus", "op_estimates"):
        a, b = np.asarray(getattr(hist_a, name)), np.asarray(getattr(hist_b, name))
        deviations[name] = float(np.max(np.abs(a - b), initial=0.0))

    worst = max(deviations.values())
    first.logger.info(f"B-scaling check c={c:g}, {iters} iterations: max deviation {worst:.3g}")
    return {"c": c, "iterations": iters, "max_deviation": worst, "deviations": deviations}
