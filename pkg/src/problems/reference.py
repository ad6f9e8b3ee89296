"""Independent reference oracles used to cross-check planted solutions and solver output."""

import itertools
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

from ..core.vector_core import BoxSet, RealVector, spectral_norm_reference
from ..utils.errors import OracleUnavailableError
from ..utils.logger import get_logger
from .generators import ProblemInstance
from .models import GroundTruth, SaddleProblem

logger = get_logger("problems.reference")

GRID_MAX_DIM = 3
GRID_POINTS = 21


def grid_argmax(
    fun: Callable[[RealVector], float], box: BoxSet, rel_step: float = 1e-3
) -> Tuple[RealVector, float]:
    """
    Maximize a concave function over a small bounded box by zooming grids.

    Each round evaluates ``GRID_POINTS`` per axis and shrinks the window
    to two cells around the best point, until the cell width is at most
    ``rel_step`` times the box extent.

    Raises:
        OracleUnavailableError: Above three dimensions or on unbounded boxes
    """
    if box.dim > GRID_MAX_DIM or not box.is_bounded:
        raise OracleUnavailableError(
            f"grid search needs a bounded box of dimension <= {GRID_MAX_DIM}"
        )
    target = rel_step * (box.upper - box.lower)
    lo, hi = box.lower.copy(), box.upper.copy()
    best_point, best_value = lo.copy(), -np.inf
    while True:
        axes = [np.linspace(lo[i], hi[i], GRID_POINTS) for i in range(box.dim)]
        step = (hi - lo) / (GRID_POINTS - 1)
        for point in itertools.product(*axes):
            candidate = np.array(point)
            value = fun(candidate)
            if value > best_value:
                best_value, best_point = value, candidate
        if np.all(step <= target):
            return best_point, float(best_value)
        lo = np.maximum(box.lower, best_point - 2.0 * step)
        hi = np.minimum(box.upper, best_point + 2.0 * step)


def classical_pdhg(
    problem: SaddleProblem, iters: int = 20000, seed: int = 0
) -> Tuple[RealVector, RealVector]:
    """
    Fixed-step PDHG with ``sigma = tau = 0.9 / ||A||`` and extrapolation 1.

    The norm comes from the power method; the last iterate is returned.
    """
    A, f, g = problem.A, problem.f, problem.g
    norm = spectral_norm_reference(A, seed=seed)
    if norm == 0.0:
        raise OracleUnavailableError("classical PDHG needs a nonzero operator")
    step = 0.9 / norm
    x = problem.x0.copy()
    y = problem.g.domain.project(np.zeros(A.rows))
    for _ in range(iters):
        x_next = f.prox(A.adjoint(y), x, step)
        x_bar = 2.0 * x_next - x
        y = g.prox(-A.forward(x_bar), y, step)
        x = x_next
    return x, y


def _dense_kkt(instance: ProblemInstance) -> Tuple[RealVector, RealVector, Optional[RealVector]]:
    d = instance.data
    if instance.family == "two-block-qp":
        K, B = d["K"], d["B"]
        m, n = K.shape
        n2 = B.shape[1]
        lhs = np.zeros((n + n2 + m, n + n2 + m))
        lhs[:n, :n] = np.diag(d["p_x"])
        lhs[:n, n + n2 :] = K.T
        lhs[n : n + n2, n : n + n2] = np.diag(d["p_w"])
        lhs[n : n + n2, n + n2 :] = -B.T
        lhs[n + n2 :, :n] = -K
        lhs[n + n2 :, n : n + n2] = B
        rhs = np.concatenate([-d["q_x"], -d["q_w"], d["b"]])
        sol = scipy.linalg.solve(lhs, rhs)
        return sol[:n], sol[n + n2 :], sol[n : n + n2]
    A = d["A"]
    m, n = A.shape
    P = np.diag(d["p"]) if instance.family == "constrained-qp" else d["P"]
    lhs = np.block([[P, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([-d["q"], d["b"]])
    sol = scipy.linalg.solve(lhs, rhs)
    return sol[:n], sol[n:], None


def _grid_saddle(instance: ProblemInstance, rel_step: float) -> Tuple[RealVector, RealVector]:
    d = instance.data
    A, c, dv, X, Y = d["A"], d["c"], d["d"], d["X"], d["Y"]

    def primal(x: RealVector) -> float:
        # f(x) + max_y <A x - d, y>
        s = A @ x - dv
        return -(float(c @ x) + float(np.sum(np.maximum(s * Y.lower, s * Y.upper))))

    def dual(y: RealVector) -> float:
        # -g(y) + min_x <c + A^T y, x>
        s = c + A.T @ y
        return -float(dv @ y) + float(np.sum(np.minimum(s * X.lower, s * X.upper)))

    x, _ = grid_argmax(primal, X, rel_step)
    y, _ = grid_argmax(dual, Y, rel_step)
    return x, y


def reference_solve(
    instance: ProblemInstance, rel_step: float = 1e-3, iters: int = 20000
) -> GroundTruth:
    """
    Solve an instance without the adaptive solvers.

    Equality-constrained quadratics use the dense KKT system, small
    box-bilinear games a zooming grid, everything else classical PDHG.

    Raises:
        OracleUnavailableError: If the box constraints are active at the
            KKT solution, or no reference method applies
    """
    family = instance.family
    if family in ("constrained-qp", "smooth-constrained", "two-block-qp"):
        x, y, w = _dense_kkt(instance)
        if not instance.X.contains(x):
            raise OracleUnavailableError("box constraints active at the KKT point")
        method = "dense KKT"
    elif (
        family == "box-bilinear"
        and instance.spec.n <= GRID_MAX_DIM
        and instance.spec.m <= GRID_MAX_DIM
    ):
        x, y = _grid_saddle(instance, rel_step)
        w = None
        method = "grid search"
    else:
        x, y = classical_pdhg(instance.saddle(), iters, seed=instance.spec.seed)
        w = None
        method = "classical PDHG"
    truth = instance.certify(x, y, w)
    logger.info(f"reference {method} for {family}: max residual {truth.max_residual:.3g}")
    return truth
