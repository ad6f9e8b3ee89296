"""
Certificates: gap-function evaluation, computable error bounds and the
guess-and-check drivers for an unknown dual radius.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.optimize

from ..core.vector_core import RealVector
from ..problems.models import (
    SaddleProblem,
    SmoothSaddleProblem,
    SmoothTwoBlockProblem,
    TwoBlockProblem,
)
from ..problems.reference import GRID_MAX_DIM, grid_argmax
from ..utils.errors import ConfigError, GuessCheckError, OracleUnavailableError
from ..utils.logger import get_logger
from .accel import AadmmSolver, ApdhgSolver
from .admm import AdmmSolver
from .common import FIRST_REPORT, SolveReport, StoppingRule, error_bound_values
from .pdhg import PdhgSolver
from .scheduler import SchedulerConfig

logger = get_logger("solvers.certify")

AnySaddle = Union[SaddleProblem, SmoothSaddleProblem]
AnyTwoBlock = Union[TwoBlockProblem, SmoothTwoBlockProblem]


def _primal_value(problem: Any, x: RealVector) -> float:
    if isinstance(problem, SaddleProblem):
        return problem.f.value(x)
    return problem.objective(x)


def gap_at(z_bar: Sequence[RealVector], z: Sequence[RealVector], problem: Any) -> float:
    """
    Primal-dual gap function ``Q(z_bar, z)``.

    Saddle problems take ``z = (x, y)``:
        ``f(xb) + <A xb, y> - g(y) - [f(x) + <A x, yb> - g(yb)]``.
    Two-block problems take ``z = (x, w, y)`` and the Lagrangian
    ``F(x) + G(w) + <y, K x - B w + b>``.

    Raises:
        OracleUnavailableError: If a function part is not evaluable
    """
    if isinstance(problem, (TwoBlockProblem, SmoothTwoBlockProblem)):
        xb, wb, yb = (np.asarray(v, dtype=np.float64) for v in z_bar)
        x, w, y = (np.asarray(v, dtype=np.float64) for v in z)
        B, K = problem.G_aug.B, problem.K
        outer = problem.objective(xb, wb) + float(y @ (K.forward(xb) - B.forward(wb) + problem.b))
        inner = problem.objective(x, w) + float(yb @ (K.forward(x) - B.forward(w) + problem.b))
        return outer - inner
    xb, yb = (np.asarray(v, dtype=np.float64) for v in z_bar)
    x, y = (np.asarray(v, dtype=np.float64) for v in z)
    A, g = problem.A, problem.g
    outer = _primal_value(problem, xb) + float(A.forward(xb) @ y) - g.value(y)
    inner = _primal_value(problem, x) + float(A.forward(x) @ yb) - g.value(yb)
    return outer - inner


def _sup_smooth_primal(problem: SmoothSaddleProblem, s: RealVector, grid: bool) -> float:
    """sup over X of ``<s, x> - f(x)`` for a smooth f without separable form."""
    X, f = problem.X, problem.f

    def negated(x: RealVector) -> Tuple[float, RealVector]:
        value, grad = f.value_and_grad(x)
        return value - float(s @ x), grad - s

    result = scipy.optimize.minimize(
        negated,
        X.project(problem.x0),
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(X.lower, X.upper)),
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000},
    )
    if result.success:
        return -float(result.fun)
    if grid and X.dim <= GRID_MAX_DIM:
        logger.debug(f"L-BFGS-B stopped early ({result.message}); using grid search")
        return grid_argmax(lambda x: float(s @ x) - f.value(x), X)[1]
    raise OracleUnavailableError(f"could not maximize over X: {result.message}")


def gap_sup_box(
    z_bar: Sequence[RealVector], problem: AnySaddle, grid_fallback: bool = True
) -> float:
    """
    ``max_{z in Z} Q(z_bar, z)`` on bounded boxes.

    The supremum splits into ``f(xb) + g(yb) + sup_y [<A xb, y> - g(y)]
    + sup_x [-f(x) - <A^T yb, x>]``; separable parts are maximized
    coordinatewise, smooth non-separable f by bounded L-BFGS-B.

    Raises:
        OracleUnavailableError: On unbounded domains or unsupported parts
    """
    if not (problem.X.is_bounded and problem.Y.is_bounded):
        raise OracleUnavailableError("sup-gap needs bounded X and Y")
    xb, yb = (np.asarray(v, dtype=np.float64) for v in z_bar)
    A = problem.A
    dual_part, _ = problem.g.conjugate_on_domain(A.forward(xb))
    s = -A.adjoint(yb)
    if isinstance(problem, SaddleProblem):
        primal_part, _ = problem.f.conjugate_on_domain(s)
    else:
        try:
            primal_part, _ = problem.f.as_prox(problem.X).conjugate_on_domain(s)
        except OracleUnavailableError:
            primal_part = _sup_smooth_primal(problem, s, grid_fallback)
    return _primal_value(problem, xb) + problem.g.value(yb) + dual_part + primal_part


def gap_sup_grid(z_bar: Sequence[RealVector], problem: AnySaddle, rel_step: float = 1e-3) -> float:
    """Grid-search counterpart of :func:`gap_sup_box` for blocks of dimension <= 3."""
    if not (problem.X.is_bounded and problem.Y.is_bounded):
        raise OracleUnavailableError("sup-gap needs bounded X and Y")
    xb, yb = (np.asarray(v, dtype=np.float64) for v in z_bar)
    Axb, Atyb = problem.A.forward(xb), problem.A.adjoint(yb)
    g = problem.g
    _, dual_part = grid_argmax(lambda y: float(Axb @ y) - g.value(y), problem.Y, rel_step)
    _, primal_part = grid_argmax(
        lambda x: -_primal_value(problem, x) - float(Atyb @ x), problem.X, rel_step
    )
    return _primal_value(problem, xb) + g.value(yb) + dual_part + primal_part


def error_bounds(
    k: int,
    L_hat: float,
    mu_d: float,
    beta: float,
    alpha: float,
    D_X: float,
    accelerated: bool = False,
) -> Tuple[float, float]:
    """
    Computable bounds (E1, E2) on the optimality gap and the violation.

    ``L_hat`` is the running operator-norm estimate, or for accelerated
    runs the combined curvature estimate.

    Raises:
        ValueError: If ``k < 3`` or an argument is not positive
    """
    if k < FIRST_REPORT:
        raise ValueError(f"error bounds need k >= {FIRST_REPORT}, got {k}")
    if mu_d <= 0.0 or beta <= 0.0 or D_X < 0.0:
        raise ValueError("error bounds need mu_d > 0, beta > 0 and D_X >= 0")
    curvature = L_hat if accelerated else L_hat * L_hat / mu_d
    return error_bound_values(k, curvature, mu_d, beta, alpha, D_X)


@dataclass(frozen=True)
class GuessCheckConfig:
    """Outer-loop parameters of guess-and-check."""

    D_hat0: float
    eps1: float
    eps2: float
    D_X: float
    max_outer: int = 20
    max_inner: int = 100000
    trace_stride: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.D_hat0 > 0.0:
            raise ConfigError(f"D_hat0 out of range: {self.D_hat0} (must be > 0)")
        if not (self.eps1 > 0.0 and self.eps2 > 0.0):
            raise ConfigError(f"eps out of range: ({self.eps1}, {self.eps2}) (must be > 0)")
        if not 0.0 <= self.D_X < float("inf"):
            raise ConfigError(f"D_X out of range: {self.D_X} (must be finite)")
        if self.max_outer < 1 or self.max_inner < FIRST_REPORT:
            raise ConfigError("max_outer must be >= 1 and max_inner >= 3")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GuessCheckConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class GuessCheckRound:
    """One outer iteration of guess-and-check."""

    i: int
    D_hat: float
    mu_d: float
    k_hat: int
    E1: Optional[float]
    E2: Optional[float]
    residual: Optional[float]
    status: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class GuessCheckResult:
    """Accepted inner solve with the final radius guess and the round log."""

    report: SolveReport
    D_hat_Y: float
    outer_count: int
    rounds: List[GuessCheckRound] = field(default_factory=list)
    reports: List[SolveReport] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.report.algorithm,
            "D_hat_Y": self.D_hat_Y,
            "outer_count": self.outer_count,
            "rounds": [r.to_dict() for r in self.rounds],
            "certificate": self.report.certificate.to_dict(),
        }


def _guess_and_check(
    problem: Any,
    gc: GuessCheckConfig,
    config: SchedulerConfig,
    solver_cls: type,
    probe_seed: int,
) -> GuessCheckResult:
    config = replace(config, initial_line_search=True)
    rounds: List[GuessCheckRound] = []
    reports: List[SolveReport] = []
    stop = StoppingRule(
        max_iters=gc.max_inner,
        eps1=gc.eps1,
        eps2=gc.eps2,
        D_X=gc.D_X,
        trace_stride=gc.trace_stride,
    )
    for i in range(gc.max_outer):
        D_hat = gc.D_hat0 * 2.0**i
        mu_d = gc.eps2 / (4.0 * D_hat)
        solver = solver_cls(problem, config.with_mu(mu_d), probe_seed)
        report = solver.solve(stop)
        cert = report.certificate
        rounds.append(
            GuessCheckRound(
                i=i,
                D_hat=D_hat,
                mu_d=mu_d,
                k_hat=report.iterations,
                E1=cert.E1,
                E2=cert.E2,
                residual=cert.violation,
                status=report.status,
            )
        )
        reports.append(report)
        if report.status != "eps_targets":
            raise GuessCheckError(
                f"inner solve reached {gc.max_inner} iterations without meeting the targets "
                f"at outer loop {i}",
                diagnostics={"rounds": [r.to_dict() for r in rounds]},
            )
        logger.info(
            f"guess-and-check round {i}: D_hat={D_hat:.6g}, mu_d={mu_d:.6g}, "
            f"k={report.iterations}, residual={cert.violation:.3g}"
        )
        if cert.violation <= gc.eps2:
            return GuessCheckResult(report, D_hat, i + 1, rounds, reports)
    raise GuessCheckError(
        f"guess-and-check exceeded {gc.max_outer} outer loops",
        diagnostics={"rounds": [r.to_dict() for r in rounds]},
    )


def guess_and_check_pdhg(
    problem: AnySaddle,
    gc: GuessCheckConfig,
    config: SchedulerConfig,
    probe_seed: int = 0,
) -> GuessCheckResult:
    """
    Double the dual radius guess until the averaged iterate is feasible to eps2.

    Raises:
        ConfigError: If the problem is not linearly constrained
        GuessCheckError: If an inner or the outer budget runs out
    """
    if not problem.is_constrained:
        raise ConfigError("guess-and-check needs a linearly constrained problem")
    solver_cls = ApdhgSolver if isinstance(problem, SmoothSaddleProblem) else PdhgSolver
    return _guess_and_check(problem, gc, config, solver_cls, probe_seed)


def guess_and_check_admm(
    problem: AnyTwoBlock,
    gc: GuessCheckConfig,
    config: SchedulerConfig,
    probe_seed: int = 0,
) -> GuessCheckResult:
    """Two-block counterpart of :func:`guess_and_check_pdhg`."""
    solver_cls = AadmmSolver if isinstance(problem, SmoothTwoBlockProblem) else AdmmSolver
    return _guess_and_check(problem, gc, config, solver_cls, probe_seed)
