"""
Function oracles: closed-form prox mappings, gradient oracles and the
augmented (ADMM w-step) subproblem solver.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike
from scipy.special import expit

from .vector_core import BoxSet, LinearMap, RealVector, as_vector
from ..utils.errors import OracleUnavailableError
from ..utils.logger import get_logger

PROX_KINDS = ("zero", "linear", "l1", "quadratic", "indicator")
SMOOTH_KINDS = ("quadratic", "logistic", "custom")
AUGMENTED_STRATEGIES = ("prox", "factorized", "iterative")

# Domain membership slack when evaluating function values at averaged points.
DOMAIN_TOL = 1e-9

Stepsize = Union[float, np.ndarray]


def _coefficients(values: ArrayLike, dim: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(values, dtype=np.float64), (dim,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ProxOracle:
    """
    A separable prox-friendly function restricted to a box.

    Supported kinds and their values on the domain:
        zero:       0
        linear:     <c, x>
        l1:         sum_i lam_i |x_i|
        quadratic:  1/2 sum_i p_i x_i^2 + <q, x>   (p >= 0)
        indicator:  0 (the function is the box indicator alone)
    """

    kind: str
    domain: BoxSet
    linear_coef: Optional[np.ndarray] = None
    l1_weight: Optional[np.ndarray] = None
    curvature: Optional[np.ndarray] = None
    evaluable: bool = True

    def __post_init__(self) -> None:
        if self.kind not in PROX_KINDS:
            raise OracleUnavailableError(
                f"prox kind '{self.kind}' is not supported (supported: {PROX_KINDS})"
            )

    @classmethod
    def zero(cls, domain: BoxSet) -> "ProxOracle":
        return cls("zero", domain)

    @classmethod
    def linear(cls, c: ArrayLike, domain: BoxSet) -> "ProxOracle":
        return cls("linear", domain, linear_coef=_coefficients(c, domain.dim, "c"))

    @classmethod
    def l1(cls, lam: ArrayLike, domain: BoxSet) -> "ProxOracle":
        weight = _coefficients(lam, domain.dim, "lambda")
        if np.any(weight < 0.0):
            raise ValueError("l1 weight must be nonnegative")
        return cls("l1", domain, l1_weight=weight)

    @classmethod
    def quadratic(cls, p: ArrayLike, q: ArrayLike, domain: BoxSet) -> "ProxOracle":
        curvature = _coefficients(p, domain.dim, "p")
        if np.any(curvature < 0.0):
            raise ValueError("separable quadratic curvature must be nonnegative")
        return cls(
            "quadratic",
            domain,
            linear_coef=_coefficients(q, domain.dim, "q"),
            curvature=curvature,
        )

    @classmethod
    def indicator(cls, domain: BoxSet) -> "ProxOracle":
        return cls("indicator", domain)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def is_differentiable(self) -> bool:
        return self.kind in ("zero", "linear", "quadratic", "indicator")

    def prox(self, linear: RealVector, center: RealVector, eta: Stepsize) -> RealVector:
        """
        argmin over the domain of ``eta * (<linear, x> + f(x)) + 1/2 ||center - x||^2``.

        ``eta`` may be a positive scalar or a positive per-coordinate array.
        """
        linear = np.asarray(linear, dtype=np.float64)
        center = np.asarray(center, dtype=np.float64)
        if linear.shape != (self.dim,) or center.shape != (self.dim,):
            raise ValueError(
                f"prox expects vectors of length {self.dim}, "
                f"got {linear.shape} and {center.shape}"
            )
        if not np.all(np.asarray(eta) > 0.0):
            raise ValueError(f"prox stepsize must be positive, got {eta}")

        shifted = center - eta * linear
        if self.kind == "linear":
            shifted = shifted - eta * self.linear_coef
        elif self.kind == "l1":
            shifted = np.sign(shifted) * np.maximum(
                np.abs(shifted) - eta * self.l1_weight, 0.0
            )
        elif self.kind == "quadratic":
            shifted = (shifted - eta * self.linear_coef) / (1.0 + eta * self.curvature)
        return self.domain.project(shifted)

    def elementwise_value(self, x: RealVector) -> np.ndarray:
        """Per-coordinate terms of the function value (domain not checked)."""
        if self.kind == "linear":
            return self.linear_coef * x
        if self.kind == "l1":
            return self.l1_weight * np.abs(x)
        if self.kind == "quadratic":
            return 0.5 * self.curvature * x * x + self.linear_coef * x
        return np.zeros_like(x)

    def value(self, x: RealVector) -> float:
        """Function value including the domain indicator."""
        if not self.evaluable:
            raise OracleUnavailableError(f"{self.kind} oracle is not evaluable")
        x = np.asarray(x, dtype=np.float64)
        if not self.domain.contains(x, tol=DOMAIN_TOL):
            return float("inf")
        return float(np.sum(self.elementwise_value(x)))

    def conjugate_on_domain(self, s: RealVector) -> Tuple[float, RealVector]:
        """
        sup over the (bounded) domain of ``<s, x> - f(x)`` and a maximizer.

        Each coordinate is a concave 1-D problem; its maximum is attained
        at an endpoint or at the clipped stationary point.
        """
        if not self.evaluable:
            raise OracleUnavailableError(f"{self.kind} oracle is not evaluable")
        if not self.domain.is_bounded:
            raise OracleUnavailableError(
                "coordinatewise maximization needs a bounded domain"
            )
        s = np.asarray(s, dtype=np.float64)
        lo, hi = self.domain.lower, self.domain.upper
        if self.kind == "l1":
            stationary = np.zeros_like(s)
        elif self.kind == "quadratic":
            p = self.curvature
            safe = np.where(p > 0.0, p, 1.0)
            stationary = np.where(p > 0.0, (s - self.linear_coef) / safe, lo)
        else:
            stationary = lo
        candidates = np.stack([lo, hi, np.clip(stationary, lo, hi)])
        scores = np.stack(
            [s * cand - self.elementwise_value(cand) for cand in candidates]
        )
        best = np.argmax(scores, axis=0)
        cols = np.arange(s.shape[0])
        return float(np.sum(scores[best, cols])), candidates[best, cols]

    def rescaled(self, c: float) -> "ProxOracle":
        """The oracle of ``w -> f(c w)`` on the domain scaled by ``1/c``."""
        if c <= 0.0:
            raise ValueError(f"scale must be positive, got {c}")
        domain = self.domain.scaled(c)
        if self.kind == "zero":
            scaled = ProxOracle.zero(domain)
        elif self.kind == "indicator":
            scaled = ProxOracle.indicator(domain)
        elif self.kind == "linear":
            scaled = ProxOracle.linear(c * self.linear_coef, domain)
        elif self.kind == "l1":
            scaled = ProxOracle.l1(c * self.l1_weight, domain)
        elif self.kind == "quadratic":
            scaled = ProxOracle.quadratic(
                c * c * self.curvature, c * self.linear_coef, domain
            )
        else:
            raise OracleUnavailableError(f"{self.kind} oracle is not closed under scaling")
        return replace(scaled, evaluable=self.evaluable)


def prox(oracle: ProxOracle, linear: RealVector, center: RealVector, eta: Stepsize) -> RealVector:
    """Module-level alias of :meth:`ProxOracle.prox`."""
    return oracle.prox(linear, center, eta)


def dual_prox(
    g: ProxOracle,
    minus_Ax: RealVector,
    anchor: RealVector,
    mu_d: float,
    tau: float,
    y_prev: RealVector,
) -> RealVector:
    """
    argmin over Y of ``<minus_Ax, y> + g(y) + mu_d/2 ||anchor - y||^2 + tau/2 ||y_prev - y||^2``.

    The two penalties merge into one with weight ``mu_d + tau`` centred at
    their weighted mean, so a single prox call suffices.
    """
    if mu_d <= 0.0:
        raise ValueError(f"mu_d must be positive, got {mu_d}")
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    weight = mu_d + tau
    if tau == 0.0:
        center = np.asarray(anchor, dtype=np.float64)
    else:
        center = (mu_d * anchor + tau * y_prev) / weight
    return g.prox(minus_Ax, center, 1.0 / weight)


@dataclass(frozen=True, eq=False)
class SmoothOracle:
    """A convex function with Lipschitz gradient, evaluated exactly."""

    kind: str
    dim: int
    hessian: Optional[np.ndarray] = None
    linear_coef: Optional[np.ndarray] = None
    features: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    ridge: float = 0.0
    value_fn: Optional[Callable[[RealVector], float]] = field(default=None, compare=False)
    grad_fn: Optional[Callable[[RealVector], RealVector]] = field(default=None, compare=False)
    evaluable: bool = True

    def __post_init__(self) -> None:
        if self.kind not in SMOOTH_KINDS:
            raise OracleUnavailableError(f"smooth kind '{self.kind}' is not supported")

    @classmethod
    def quadratic(cls, P: ArrayLike, q: ArrayLike) -> "SmoothOracle":
        """``1/2 x^T P x + <q, x>`` with symmetric PSD ``P``."""
        hessian = np.array(P, dtype=np.float64)
        if hessian.ndim != 2 or hessian.shape[0] != hessian.shape[1]:
            raise ValueError(f"P must be square, got shape {hessian.shape}")
        if not np.allclose(hessian, hessian.T, atol=1e-12):
            raise ValueError("P must be symmetric")
        hessian.flags.writeable = False
        dim = hessian.shape[0]
        return cls("quadratic", dim, hessian=hessian, linear_coef=_coefficients(q, dim, "q"))

    @classmethod
    def isotropic(cls, L: float, dim: int) -> "SmoothOracle":
        return cls.quadratic(L * np.eye(dim), np.zeros(dim))

    @classmethod
    def linear(cls, c: ArrayLike) -> "SmoothOracle":
        c = np.atleast_1d(np.asarray(c, dtype=np.float64))
        return cls.quadratic(np.zeros((c.shape[0], c.shape[0])), c)

    @classmethod
    def logistic(
        cls, features: ArrayLike, labels: ArrayLike, ridge: float = 0.0
    ) -> "SmoothOracle":
        """Mean logistic loss of ``labels`` in {-1, +1} plus ``ridge/2 ||x||^2``."""
        Z = np.array(features, dtype=np.float64)
        if Z.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {Z.shape}")
        y = as_vector(labels, Z.shape[0], "labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if ridge < 0.0:
            raise ValueError(f"ridge must be nonnegative, got {ridge}")
        Z.flags.writeable = False
        y.flags.writeable = False
        return cls("logistic", Z.shape[1], features=Z, labels=y, ridge=float(ridge))

    @classmethod
    def custom(
        cls,
        dim: int,
        value_fn: Callable[[RealVector], float],
        grad_fn: Callable[[RealVector], RealVector],
        evaluable: bool = True,
    ) -> "SmoothOracle":
        return cls("custom", dim, value_fn=value_fn, grad_fn=grad_fn, evaluable=evaluable)

    def value_and_grad(self, x: RealVector) -> Tuple[float, RealVector]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got {x.shape}")
        if self.kind == "quadratic":
            Px = self.hessian @ x
            return float(0.5 * x @ Px + self.linear_coef @ x), Px + self.linear_coef
        if self.kind == "logistic":
            margins = self.labels * (self.features @ x)
            n = self.features.shape[0]
            value = float(np.mean(np.logaddexp(0.0, -margins)))
            grad = -(self.features.T @ (self.labels * expit(-margins))) / n
            if self.ridge:
                value += 0.5 * self.ridge * float(x @ x)
                grad = grad + self.ridge * x
            return value, grad
        grad = np.asarray(self.grad_fn(x), dtype=np.float64)
        value = float(self.value_fn(x)) if self.evaluable else float("nan")
        return value, grad

    def value(self, x: RealVector) -> float:
        if not self.evaluable:
            raise OracleUnavailableError("smooth oracle is not evaluable")
        return self.value_and_grad(x)[0]

    def grad(self, x: RealVector) -> RealVector:
        return self.value_and_grad(x)[1]

    def lipschitz_reference(self) -> float:
        """Global gradient Lipschitz constant; tests and references only."""
        if self.kind == "quadratic":
            if not np.any(self.hessian):
                return 0.0
            return float(scipy.linalg.eigvalsh(self.hessian)[-1])
        if self.kind == "logistic":
            n = self.features.shape[0]
            return float(np.linalg.norm(self.features, 2) ** 2 / (4.0 * n) + self.ridge)
        raise OracleUnavailableError("no reference Lipschitz constant for custom oracle")

    def diagonal_hessian(self) -> Optional[np.ndarray]:
        """Hessian diagonal when the function is a separable quadratic."""
        if self.kind != "quadratic":
            return None
        diag = np.diag(self.hessian).copy()
        if np.count_nonzero(self.hessian - np.diag(diag)) != 0:
            return None
        return diag

    def as_prox(self, domain: BoxSet) -> ProxOracle:
        """The same function as a separable-quadratic prox oracle on ``domain``."""
        diag = self.diagonal_hessian()
        if diag is None:
            raise OracleUnavailableError(
                f"{self.kind} smooth oracle has no separable prox form"
            )
        if not np.any(diag):
            return ProxOracle.linear(self.linear_coef, domain)
        return ProxOracle.quadratic(diag, self.linear_coef, domain)


def gradient(oracle: SmoothOracle, x: RealVector) -> Tuple[float, RealVector]:
    """Value and gradient of ``oracle`` at ``x``."""
    return oracle.value_and_grad(x)


class AugmentedOracle:
    """
    Solver for argmin over W of ``G(w) + 1/(2 rho_inv) ||B w - target||^2``.

    Strategies:
        prox:        B square diagonal with nonzero entries; one prox of G
                     with per-coordinate steps rho_inv / d_i^2.
        factorized:  W free and G zero, linear or separable quadratic; the
                     normal equations use a factorization computed once.
        iterative:   accelerated proximal gradient to a tight tolerance.
    """

    def __init__(
        self,
        G: ProxOracle,
        B: LinearMap,
        strategy: Optional[str] = None,
        allow_iterative: bool = True,
        iterative_tol: float = 1e-13,
        iterative_max_iter: int = 200000,
    ):
        """
        Initialize augmented oracle and precompute the factorization.

        Args:
            G: Prox oracle of the w-block objective over W
            B: Constraint map acting on w
            strategy: Force a strategy; chosen automatically when None
            allow_iterative: Permit the iterative fallback
            iterative_tol: Stopping tolerance of the iterative fallback
            iterative_max_iter: Iteration cap of the iterative fallback

        Raises:
            ValueError: On dimension mismatch
            OracleUnavailableError: If no strategy applies
        """
        if B.cols != G.dim:
            raise ValueError(f"B has {B.cols} columns but G acts on dimension {G.dim}")
        self.G = G
        self.B = B
        self.logger = get_logger("core.augmented")
        self.iterative_tol = iterative_tol
        self.iterative_max_iter = iterative_max_iter

        self._diag = B.diagonal()
        available = self._available(allow_iterative)
        if strategy is None:
            if not available:
                raise OracleUnavailableError(
                    f"no augmented strategy for G={G.kind} on "
                    f"{'free' if G.domain.is_free else 'constrained'} W with B {B.shape}; "
                    f"needs diagonal B, free W with smooth G, or the iterative fallback"
                )
            strategy = available[0]
        elif strategy not in available:
            raise OracleUnavailableError(
                f"augmented strategy '{strategy}' unavailable for G={G.kind}, "
                f"B {B.shape} (available: {available})"
            )
        self.strategy = strategy

        self._gram = B.gram()
        self._gram_max = float(scipy.linalg.eigvalsh(self._gram)[-1])
        self._cho = None
        self._pinv = None
        self._eig = None
        if strategy == "factorized":
            self._factorize()
        elif strategy == "iterative" and self._gram_max <= 0.0:
            raise OracleUnavailableError("iterative strategy needs a nonzero B")

    def _available(self, allow_iterative: bool) -> list:
        found = []
        if self._diag is not None and np.all(self._diag != 0.0):
            found.append("prox")
        if self.G.domain.is_free and self.G.kind in ("zero", "linear", "quadratic"):
            found.append("factorized")
        if allow_iterative:
            found.append("iterative")
        return found

    def _factorize(self) -> None:
        M = self._gram
        if self.G.kind == "quadratic" and np.any(self.G.curvature):
            P = np.diag(self.G.curvature)
            try:
                # V^T M V = I, V^T P V = diag(lam): (rho P + M)^-1 = V diag(1/(rho lam + 1)) V^T
                lam, V = scipy.linalg.eigh(P, M)
                self._eig = ("gram", lam, V)
            except np.linalg.LinAlgError:
                try:
                    lam, V = scipy.linalg.eigh(M, P)
                    self._eig = ("curvature", lam, V)
                except np.linalg.LinAlgError:
                    self._eig = None
                    self.logger.debug("augmented factorization: solving per call")
            return
        try:
            self._cho = scipy.linalg.cho_factor(M)
        except np.linalg.LinAlgError:
            self._pinv = scipy.linalg.pinvh(M)
            self.logger.debug("B^T B is singular: using pseudo-inverse")

    def solve(self, rho_inv: float, target: RealVector) -> RealVector:
        """Return the exact (or tightly converged) subproblem minimizer."""
        if rho_inv <= 0.0:
            raise ValueError(f"rho_inv must be positive, got {rho_inv}")
        target = np.asarray(target, dtype=np.float64)
        if target.shape != (self.B.rows,):
            raise ValueError(
                f"target must have length {self.B.rows}, got shape {target.shape}"
            )
        if self.strategy == "prox":
            d = self._diag
            return self.G.prox(np.zeros(self.G.dim), target / d, rho_inv / (d * d))
        if self.strategy == "factorized":
            return self._solve_factorized(rho_inv, target)
        return self._solve_iterative(rho_inv, target)

    def _solve_factorized(self, rho: float, target: RealVector) -> RealVector:
        rhs = self.B.adjoint(target)
        if self.G.kind in ("linear", "quadratic"):
            rhs = rhs - rho * self.G.linear_coef
        if self.G.kind == "quadratic" and np.any(self.G.curvature):
            if self._eig is None:
                lhs = rho * np.diag(self.G.curvature) + self._gram
                return scipy.linalg.lstsq(lhs, rhs)[0]
            mode, lam, V = self._eig
            scale = 1.0 / (rho * lam + 1.0) if mode == "gram" else 1.0 / (rho + lam)
            return V @ (scale * (V.T @ rhs))
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, rhs)
        return self._pinv @ rhs

    def _solve_iterative(self, rho: float, target: RealVector) -> RealVector:
        step = rho / self._gram_max
        w = self.G.domain.project(np.zeros(self.G.dim))
        v = w.copy()
        theta = 1.0
        for _ in range(self.iterative_max_iter):
            grad = self.B.adjoint(self.B.forward(v) - target) / rho
            w_next = self.G.prox(grad, v, step)
            theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            change = np.linalg.norm(w_next - w)
            v = w_next + ((theta - 1.0) / theta_next) * (w_next - w)
            w, theta = w_next, theta_next
            if change <= self.iterative_tol * (1.0 + np.linalg.norm(w)):
                return w
        self.logger.warning(
            f"iterative augmented solve hit {self.iterative_max_iter} iterations"
        )
        return w

    def optimality_residual(self, w: RealVector, rho_inv: float, target: RealVector) -> float:
        """
        Norm of the proximal-gradient mapping of the subproblem at ``w``.

        Zero exactly at the minimizer; for free W and differentiable G it is
        the subproblem gradient norm up to a bounded factor.
        """
        if self._gram_max <= 0.0:
            return 0.0
        step = rho_inv / self._gram_max
        grad = self.B.adjoint(self.B.forward(w) - target) / rho_inv
        moved = self.G.prox(grad, w, step)
        return float(np.linalg.norm(w - moved) / step)

    def rescaled(self, c: float) -> "AugmentedOracle":
        """Oracle of the reparameterization ``B -> cB, G(.) -> G(c .), W -> W/c``."""
        return AugmentedOracle(
            self.G.rescaled(c),
            self.B.scaled(c),
            iterative_tol=self.iterative_tol,
            iterative_max_iter=self.iterative_max_iter,
        )


def augmented_solve(oracle: AugmentedOracle, rho_inv: float, target: RealVector) -> RealVector:
    """Module-level alias of :meth:`AugmentedOracle.solve`."""
    return oracle.solve(rho_inv, target)
