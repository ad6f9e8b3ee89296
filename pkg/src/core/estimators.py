"""Local, history-based estimates of operator norms and gradient Lipschitz constants."""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .oracles import SmoothOracle
from .vector_core import TINY_NORM, LinearMap, RealVector

# Bregman denominators below this multiple of ||dx||^2 fall back to the secant ratio.
BREGMAN_FLOOR = 1e-14


def local_op_norm(A: LinearMap, y_new: RealVector, y_old: RealVector) -> float:
    """``||A^T (y_new - y_old)|| / ||y_new - y_old||`` with 0/0 = 0."""
    diff = np.asarray(y_new, dtype=np.float64) - np.asarray(y_old, dtype=np.float64)
    nrm = float(np.linalg.norm(diff))
    if nrm <= TINY_NORM:
        return 0.0
    return float(np.linalg.norm(A.adjoint(diff))) / nrm


def seed_op_norm(
    A: LinearMap, y_tilde0: RealVector, y0: RealVector, fallback_probe: RealVector
) -> float:
    """
    Seed estimate of ``||A||`` used to pick eta1.

    Uses the first dual move ``y_tilde0 - y0``; when it vanishes, the norm
    of ``A^T u`` for the normalized probe ``u`` replaces it.
    """
    diff = np.asarray(y_tilde0, dtype=np.float64) - np.asarray(y0, dtype=np.float64)
    if float(np.linalg.norm(diff)) > TINY_NORM:
        return local_op_norm(A, y_tilde0, y0)
    probe = np.asarray(fallback_probe, dtype=np.float64)
    nrm = float(np.linalg.norm(probe))
    if nrm <= TINY_NORM:
        return 0.0
    return float(np.linalg.norm(A.adjoint(probe / nrm)))


def secant_ratio(
    x_new: RealVector, x_old: RealVector, grad_new: RealVector, grad_old: RealVector
) -> float:
    dx = float(np.linalg.norm(x_new - x_old))
    if dx <= TINY_NORM:
        return 0.0
    return float(np.linalg.norm(grad_new - grad_old)) / dx


def bregman_ratio(
    x_new: RealVector,
    x_old: RealVector,
    value_new: float,
    value_old: float,
    grad_new: RealVector,
    grad_old: RealVector,
) -> float:
    """
    ``||g_new - g_old||^2 / (2 [f(x_old) - f(x_new) - <g_new, x_old - x_new>])``.

    Zero numerator gives 0. A denominator at or below
    ``BREGMAN_FLOOR * ||dx||^2`` falls back to the secant ratio.
    """
    dg = grad_new - grad_old
    numerator = float(dg @ dg)
    if numerator == 0.0:
        return 0.0
    dx = x_old - x_new
    dx_sq = float(dx @ dx)
    if dx_sq <= TINY_NORM * TINY_NORM:
        return 0.0
    denominator = 2.0 * (value_old - value_new - float(grad_new @ dx))
    if denominator <= BREGMAN_FLOOR * dx_sq:
        return math.sqrt(numerator / dx_sq)
    return numerator / denominator


def local_smooth_first(f: SmoothOracle, x1: RealVector, x0: RealVector) -> float:
    """Secant estimate of the gradient Lipschitz constant between two points."""
    return secant_ratio(x1, x0, f.grad(x1), f.grad(x0))


def local_smooth_bregman(f: SmoothOracle, x_new: RealVector, x_old: RealVector) -> float:
    """Bregman-form estimate of the gradient Lipschitz constant."""
    value_new, grad_new = f.value_and_grad(x_new)
    value_old, grad_old = f.value_and_grad(x_old)
    return bregman_ratio(x_new, x_old, value_new, value_old, grad_new, grad_old)


@dataclass
class CurvatureHistory:
    """
    Running record of local estimates and their maxima.

    For the base methods ``running_max`` is an operator-norm estimate
    (floored by sqrt(mu_d / (4 (1 - beta) eta1))); for accelerated methods
    it is the combined curvature max(L_op^2 / mu_d + L_smooth), floored by
    1 / (4 (1 - beta) eta1). ``curvature`` maps either onto the common
    scale used by the stepsize lower bound and all certificates.
    """

    mu_d: float
    beta: float
    eta1: float
    accelerated: bool = False
    op_estimates: List[float] = field(default_factory=list)
    smooth_estimates: List[float] = field(default_factory=list)
    maxima: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.maxima:
            self.maxima.append(self.seed_term)

    @property
    def seed_term(self) -> float:
        floor = 1.0 / (4.0 * (1.0 - self.beta) * self.eta1)
        if self.accelerated:
            return floor
        return math.sqrt(self.mu_d * floor)

    def push(self, op_estimate: float, smooth_estimate: float = 0.0) -> float:
        """Record estimates for the next iteration and return the new running max."""
        self.op_estimates.append(float(op_estimate))
        self.smooth_estimates.append(float(smooth_estimate))
        if self.accelerated:
            candidate = op_estimate * op_estimate / self.mu_d + smooth_estimate
        else:
            candidate = op_estimate
        self.maxima.append(max(self.maxima[-1], candidate))
        return self.maxima[-1]

    @property
    def t(self) -> int:
        return len(self.op_estimates)

    @property
    def latest_op_estimate(self) -> float:
        return self.op_estimates[-1] if self.op_estimates else 0.0

    @property
    def latest_smooth_estimate(self) -> float:
        return self.smooth_estimates[-1] if self.smooth_estimates else 0.0

    @property
    def running_max(self) -> float:
        return self.maxima[-1]

    def curvature(self, t: int = -1) -> float:
        """Running max after ``t`` pushes on the ``L^2 / mu_d`` scale."""
        value = self.maxima[t]
        if self.accelerated:
            return value
        return value * value / self.mu_d
