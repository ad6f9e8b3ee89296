"""Machinery shared by all auto-conditioned solvers: averaging, bounds, the solve loop."""

import math
import time
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.vector_core import RealVector
from ..storage.data_models import (
    Certificate,
    ConstrainedCertificate,
    TraceBuffer,
    TraceRecord,
)
from ..utils.errors import DivergenceError, SolverError
from ..utils.logger import get_logger
from .scheduler import (
    SchedulerConfig,
    SchedulerState,
    StepHistory,
    init_eta1,
    initial_line_search,
)

FIRST_REPORT = 3


def rate_denominator(k: int, alpha: float) -> float:
    """``6k + alpha k (k - 3)``, the growth of the summed stepsizes."""
    return 6.0 * k + alpha * k * (k - 3)


def bounded_gap_bound(
    k: int, curvature: float, beta: float, alpha: float, mu_d: float, D_X: float, D_Y: float
) -> float:
    """Certified sup-gap on bounded domains after ``k`` iterations."""
    return (
        12.0 * curvature * (1.0 / beta + 5.0 / 8.0) * D_X * D_X / rate_denominator(k, alpha)
        + 0.5 * mu_d * D_Y * D_Y
    )


def error_bound_values(
    k: int, curvature: float, mu_d: float, beta: float, alpha: float, D_X: float
) -> Tuple[float, float]:
    """
    E1 and E2 on the common curvature scale (``L_hat^2 / mu_d`` or combined).

    E1 = 12 C D_X^2 / (beta c_k), E2 = 4 sqrt(12 mu_d C D_X^2 / (beta c_k)).
    """
    ck = rate_denominator(k, alpha)
    e1 = 12.0 * curvature * D_X * D_X / (beta * ck)
    e2 = 4.0 * math.sqrt(12.0 * mu_d * curvature * D_X * D_X / (beta * ck))
    return e1, e2


@dataclass(frozen=True)
class StoppingRule:
    """When to stop a solve; ``max_iters`` always applies."""

    max_iters: int
    gap_target: Optional[float] = None
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    D_X: Optional[float] = None
    D_Y: Optional[float] = None
    trace_stride: Optional[int] = None
    record_wall_clock: bool = False

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if (self.eps1 is None) != (self.eps2 is None):
            raise ValueError("eps1 and eps2 must be given together")

    @property
    def stride(self) -> int:
        if self.trace_stride is not None:
            return self.trace_stride
        return 1 if self.max_iters <= 1000 else 10

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StoppingRule":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class AverageAccumulator:
    """
    Stepsize-weighted averages with a one-iteration deferred commit.

    Iterate t carries weight eta_{t+1}, which exists only after the
    scheduler has seen L_t; ``stage`` parks iterate t until ``commit``.
    The special dual average uses the telescoped numerator
    ``sum eta_{t+1} ((mu_d + tau_t) y_t - tau_t y_{t-1})`` whose weights
    sum to ``mu_d S``.
    """

    def __init__(self, mu_d: float):
        self.mu_d = mu_d
        self.weight_sum = 0.0
        self.count = 0
        self.x_num: Optional[np.ndarray] = None
        self.y_num: Optional[np.ndarray] = None
        self.w_num: Optional[np.ndarray] = None
        self.ytilde_num: Optional[np.ndarray] = None
        self._pending: Optional[Tuple[Any, ...]] = None

    def stage(
        self,
        x: RealVector,
        y: RealVector,
        y_prev: RealVector,
        tau: float,
        w: Optional[RealVector] = None,
    ) -> None:
        if self._pending is not None:
            raise SolverError("average staged twice without commit")
        self._pending = (x.copy(), y.copy(), y_prev.copy(), tau, None if w is None else w.copy())

    def commit(self, eta_next: float) -> None:
        if self._pending is None:
            raise SolverError("average committed with nothing staged")
        x, y, y_prev, tau, w = self._pending
        self._pending = None
        dual_term = eta_next * (self.mu_d + tau) * y - eta_next * tau * y_prev
        if self.count == 0:
            self.x_num = eta_next * x
            self.y_num = eta_next * y
            self.ytilde_num = dual_term
            self.w_num = None if w is None else eta_next * w
        else:
            self.x_num = self.x_num + eta_next * x
            self.y_num = self.y_num + eta_next * y
            self.ytilde_num = self.ytilde_num + dual_term
            if w is not None:
                self.w_num = self.w_num + eta_next * w
        self.weight_sum += eta_next
        self.count += 1

    @property
    def has_pending(self) -> bool:
        return self._pending is not None

    def x_hat(self) -> RealVector:
        return self.x_num / self.weight_sum

    def y_hat(self) -> RealVector:
        return self.y_num / self.weight_sum

    def w_hat(self) -> Optional[RealVector]:
        return None if self.w_num is None else self.w_num / self.weight_sum

    def y_tilde(self) -> RealVector:
        return self.ytilde_num / (self.mu_d * self.weight_sum)


@dataclass
class SolveReport:
    """Outcome of one solve. Treated as read-only once returned."""

    algorithm: str
    status: str
    iterations: int
    x_hat: RealVector
    y_hat: RealVector
    y_tilde: RealVector
    x_last: RealVector
    y_last: RealVector
    trace: List[TraceRecord]
    certificate: Certificate
    history: StepHistory
    w_hat: Optional[RealVector] = None
    w_last: Optional[RealVector] = None
    grad_calls: Optional[int] = None


class PrimalDualSolver(ABC):
    """
    Common loop of the auto-conditioned methods.

    Subclasses define the starting points and one iteration; this class
    owns the scheduler, the averages, the trace and the certificates.
    """

    algorithm = "abstract"
    accelerated = False
    two_block = False
    smooth = False

    # attributes saved and restored around trial iterations
    _state_fields: Tuple[str, ...] = ("x", "xbar", "y", "y_prev")

    def __init__(self, problem: Any, config: SchedulerConfig, probe_seed: int = 0):
        """
        Initialize solver.

        Args:
            problem: Problem instance matching the subclass
            config: Stepsize policy parameters
            probe_seed: Seed of the random unit probes used for eta1 seeding
        """
        self.problem = problem
        self.config = config
        self.logger = get_logger(f"solvers.{self.algorithm}")
        self.scheduler = SchedulerState(config, accelerated=self.accelerated)
        self.averages = AverageAccumulator(config.mu_d)
        self.rng = np.random.default_rng(probe_seed)
        self.t = 0
        self.line_search_halvings = 0
        self.grad_calls = 0
        self.x1: Optional[RealVector] = None
        self.last_op = 0.0
        self.last_smooth = 0.0

    # -- subclass hooks -------------------------------------------------

    @abstractmethod
    def _start(self) -> None:
        """Set x0, xbar, y0 (and w0, gradient caches) from the problem."""

    @abstractmethod
    def _seed_curvature(self) -> Tuple[float, float]:
        """(L_op0, L_smooth0) used to seed eta1."""

    @abstractmethod
    def _step(self, t: int, eta: float, tau: float) -> Tuple[float, float]:
        """Run iteration ``t`` in place and return (L_op_t, L_smooth_t)."""

    @abstractmethod
    def constraint_residual(self) -> Optional[RealVector]:
        """Averaged constraint residual, or None for unconstrained problems."""

    @abstractmethod
    def primal_domain_radius(self) -> float:
        """max over X of ||x - x0||."""

    @abstractmethod
    def dual_domain_radius(self) -> float:
        """max over Y of ||y - y_tilde0||."""

    def _stage_average(self, tau: float) -> None:
        self.averages.stage(self.x, self.y, self.y_prev, tau)

    def subproblem_residual(self) -> Optional[float]:
        return None

    # -- lifecycle -------------------------------------------------------

    def initialize(self) -> "PrimalDualSolver":
        """Compute starting points and fix eta1 (seeded, supplied or line-searched)."""
        self._start()
        op0, smooth0 = self._seed_curvature()
        eta1 = self._init_eta1(op0, smooth0)
        if self.config.initial_line_search:
            eta1, self.line_search_halvings = initial_line_search(
                self._trial_first_step, eta1, self.config.mu_d
            )
        self.scheduler.start(eta1)
        self.logger.debug(
            f"initialized: seed L_op0={op0:.6g}, L_smooth0={smooth0:.6g}, eta1={eta1:.6g}"
        )
        return self

    def _init_eta1(self, op0: float, smooth0: float) -> float:
        return init_eta1(self.config, op0, smooth0)

    def _save(self) -> Dict[str, Any]:
        saved = {}
        for name in self._state_fields:
            value = getattr(self, name)
            saved[name] = value.copy() if isinstance(value, np.ndarray) else value
        saved["grad_calls"] = self.grad_calls
        return saved

    def _restore(self, saved: Dict[str, Any]) -> None:
        for name, value in saved.items():
            setattr(self, name, value)

    def _trial_first_step(self, eta1: float) -> Tuple[float, float]:
        saved = self._save()
        try:
            return self._step(1, eta1, 0.0)
        finally:
            self._restore(saved)

    def iterate(self) -> "PrimalDualSolver":
        """
        Run one iteration with the scheduler's current (eta_t, tau_t).

        Raises:
            DivergenceError: If an iterate becomes non-finite
        """
        if not self.scheduler.initialized:
            raise SolverError(f"{self.algorithm} iterated before initialize()")
        t = self.t + 1
        eta, tau = self.scheduler.eta, self.scheduler.tau
        L_op, L_smooth = self._step(t, eta, tau)
        self._check_finite(t)
        if t == 1:
            self.x1 = self.x.copy()
        self._stage_average(tau)
        eta_next, _ = self.scheduler.advance(L_op, L_smooth)
        self.averages.commit(eta_next)
        self.last_op, self.last_smooth = L_op, L_smooth
        self.t = t
        return self

    def _check_finite(self, t: int) -> None:
        for name in self._state_fields:
            value = getattr(self, name)
            if isinstance(value, np.ndarray) and not np.all(np.isfinite(value)):
                raise DivergenceError(t, name)

    # -- certificates ----------------------------------------------------

    def curvature(self) -> float:
        return self.scheduler.history.curvature()

    def certificate(self, stop: Optional[StoppingRule] = None) -> Certificate:
        """Certificate values at the current averaged iterate."""
        k = self.t
        cfg = self.config
        history = self.scheduler.history
        curvature = history.curvature()
        D_X = stop.D_X if stop is not None and stop.D_X is not None else self.primal_domain_radius()
        D_Y = stop.D_Y if stop is not None and stop.D_Y is not None else self.dual_domain_radius()

        cert = Certificate(
            algorithm=self.algorithm,
            k=k,
            mu_d=cfg.mu_d,
            beta=cfg.beta,
            alpha=cfg.alpha,
            eta1=self.scheduler.eta1,
            L_hat=history.running_max,
            curvature=curvature,
            D_X=D_X if math.isfinite(D_X) else None,
            D_Y=D_Y if math.isfinite(D_Y) else None,
            line_search_halvings=self.line_search_halvings,
        )
        if k < FIRST_REPORT:
            return cert

        if math.isfinite(D_X) and math.isfinite(D_Y):
            cert.gap_bound = bounded_gap_bound(
                k, curvature, cfg.beta, cfg.alpha, cfg.mu_d, D_X, D_Y
            )
        residual = self.constraint_residual()
        if residual is not None:
            y_tilde = self.averages.y_tilde()
            cert.violation = float(np.linalg.norm(residual))
            cert.dual_residual = float(cfg.mu_d * np.linalg.norm(y_tilde))
            cert.identity_residual = float(np.linalg.norm(residual - cfg.mu_d * y_tilde))
            if math.isfinite(D_X):
                cert.E1, cert.E2 = error_bound_values(
                    k, curvature, cfg.mu_d, cfg.beta, cfg.alpha, D_X
                )
        return cert

    def constrained_bracket(self, x_star: RealVector) -> float:
        """
        ``||x0 - x*||^2 / beta + (5 eta2 C_1 / 2 - eta2 / (2 eta1)) ||x1 - x0||^2``

        with ``C_1 = L_op1^2 / mu_d (+ L_smooth1)``.
        """
        if self.t < 1 or self.x1 is None:
            raise SolverError("constrained bound needs at least one iteration")
        history = self.scheduler.history
        eta1, eta2 = self.scheduler.etas[0], self.scheduler.etas[1]
        L1 = history.op_estimates[0]
        c1 = L1 * L1 / self.config.mu_d
        if self.accelerated:
            c1 += history.smooth_estimates[0]
        d0 = float(np.linalg.norm(self.x0 - x_star))
        d1 = float(np.linalg.norm(self.x1 - self.x0))
        return d0 * d0 / self.config.beta + (2.5 * eta2 * c1 - eta2 / (2.0 * eta1)) * d1 * d1

    def constrained_report(
        self,
        x_star: RealVector,
        y_star: RealVector,
        f_star: Optional[float] = None,
    ) -> ConstrainedCertificate:
        """
        Measured optimality gap and violation next to their certified bounds.

        Raises:
            SolverError: Before iteration 3 or on unconstrained problems
        """
        k = self.t
        if k < FIRST_REPORT:
            raise SolverError(f"constrained report needs k >= {FIRST_REPORT}, got {k}")
        residual = self.constraint_residual()
        if residual is None:
            raise SolverError(f"{self.algorithm} problem is not constrained")
        cfg = self.config
        ck = rate_denominator(k, cfg.alpha)
        curvature = self.curvature()
        bracket = self.constrained_bracket(x_star)
        gap_rhs = 12.0 * curvature / ck * bracket
        violation_rhs = 2.0 * cfg.mu_d * float(np.linalg.norm(y_star)) + 2.0 * math.sqrt(
            max(0.0, 12.0 * cfg.mu_d * curvature / ck * bracket)
        )
        gap = None
        if f_star is not None:
            gap = self.averaged_objective() - f_star
        return ConstrainedCertificate(
            k=k,
            optimality_gap=gap,
            violation=float(np.linalg.norm(residual)),
            mu_ytilde_norm=float(cfg.mu_d * np.linalg.norm(self.averages.y_tilde())),
            gap_rhs=gap_rhs,
            violation_rhs=violation_rhs,
            bracket=bracket,
        )

    def averaged_objective(self) -> float:
        return self.problem.objective(self.averages.x_hat())

    # -- solve loop ------------------------------------------------------

    def _record(
        self, cert: Optional[Certificate], start_ns: int, stop: StoppingRule
    ) -> TraceRecord:
        sched = self.scheduler
        t = self.t
        return TraceRecord(
            t=t,
            eta_t=float(sched.etas[t - 1]),
            tau_t=float(sched.taus[t - 1]),
            tilde_tau_t=float(sched.tilde_taus[t - 1]) if self.accelerated else None,
            L_op_t=float(self.last_op),
            L_smooth_t=float(self.last_smooth) if self.smooth else None,
            bound=None if cert is None else _first(cert.gap_bound, cert.E1),
            violation=None if cert is None else cert.violation,
            identity_residual=None if cert is None else cert.identity_residual,
            subproblem_residual=self.subproblem_residual(),
            grad_calls=self.grad_calls if self.smooth else None,
            wall_clock_ns=time.perf_counter_ns() - start_ns if stop.record_wall_clock else 0,
        )

    def _should_stop(self, cert: Certificate, stop: StoppingRule) -> Optional[str]:
        if stop.gap_target is not None and cert.gap_bound is not None:
            if cert.gap_bound <= stop.gap_target:
                return "gap_target"
        if stop.eps1 is not None and cert.E1 is not None and cert.violation is not None:
            if cert.E1 <= stop.eps1 and min(cert.violation, cert.E2) <= stop.eps2:
                return "eps_targets"
        return None

    def solve(self, stop: StoppingRule) -> SolveReport:
        """
        Iterate until the stopping rule fires.

        Raises:
            DivergenceError: If an iterate becomes non-finite
        """
        if not self.scheduler.initialized:
            self.initialize()
        start_ns = time.perf_counter_ns()
        trace = TraceBuffer(stop.stride)
        needs_cert = stop.gap_target is not None or stop.eps1 is not None
        status = "max_iters"
        self.logger.info(
            f"{self.algorithm}: solving up to {stop.max_iters} iterations, "
            f"mu_d={self.config.mu_d:.6g}, eta1={self.scheduler.eta1:.6g}"
        )

        for _ in range(stop.max_iters):
            self.iterate()
            k = self.t
            recorded = trace.wants(k)
            cert = None
            if k >= FIRST_REPORT and (recorded or needs_cert):
                cert = self.certificate(stop)
            if recorded:
                trace.add(self._record(cert, start_ns, stop))
            if cert is not None and needs_cert:
                reason = self._should_stop(cert, stop)
                if reason is not None:
                    status = reason
                    break

        final = self.certificate(stop)
        if trace.last_t != self.t:
            trace.add(self._record(final if self.t >= FIRST_REPORT else None, start_ns, stop))
        self.logger.info(
            f"{self.algorithm}: stopped at k={self.t} ({status}), "
            f"L_hat={final.L_hat:.6g}, bound={_first(final.gap_bound, final.E1)}, "
            f"violation={final.violation}"
        )
        return self._report(status, trace, final)

    def _report(self, status: str, trace: TraceBuffer, final: Certificate) -> SolveReport:
        return SolveReport(
            algorithm=self.algorithm,
            status=status,
            iterations=self.t,
            x_hat=self.averages.x_hat(),
            y_hat=self.averages.y_hat(),
            y_tilde=self.averages.y_tilde(),
            x_last=self.x.copy(),
            y_last=self.y.copy(),
            trace=list(trace.records),
            certificate=final,
            history=self.scheduler.snapshot(),
            w_hat=self.averages.w_hat(),
            w_last=self.w.copy() if self.two_block else None,
            grad_calls=self.grad_calls if self.smooth else None,
        )


def _first(*values: Optional[float]) -> Optional[float]:
    for value in values:
        if value is not None:
            return value
    return None
