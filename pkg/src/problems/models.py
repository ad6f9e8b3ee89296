"""Problem containers shared by solvers, generators and the CLI."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..core.oracles import AugmentedOracle, ProxOracle, SmoothOracle
from ..core.vector_core import BoxSet, LinearMap, RealVector, as_vector


def _start_point(x0: Optional[RealVector], box: BoxSet, name: str) -> RealVector:
    if x0 is None:
        return box.project(np.zeros(box.dim))
    x0 = as_vector(x0, box.dim, name)
    if not box.contains(x0):
        raise ValueError(f"{name} lies outside its domain")
    return x0


@dataclass(frozen=True, eq=False)
class SaddleProblem:
    """
    min over X, max over Y of ``f(x) + <A x, y> - g(y)``.

    With ``b`` set the problem is the linearly constrained ``min f(x)
    s.t. A x = b``; then g must be ``<b, y>`` on a free Y.
    """

    f: ProxOracle
    g: ProxOracle
    A: LinearMap
    b: Optional[RealVector] = None
    x0: Optional[RealVector] = None
    y_tilde0: Optional[RealVector] = None

    def __post_init__(self) -> None:
        if self.A.cols != self.f.dim or self.A.rows != self.g.dim:
            raise ValueError(
                f"operator {self.A.shape} does not match f on R^{self.f.dim} "
                f"and g on R^{self.g.dim}"
            )
        if self.b is not None:
            b = as_vector(self.b, self.A.rows, "b")
            if not (self.g.kind == "linear" and self.g.domain.is_free):
                raise ValueError("constrained mode needs g = <b, y> on a free Y")
            if not np.array_equal(self.g.linear_coef, b):
                raise ValueError("constrained mode needs g's coefficients equal to b")
            object.__setattr__(self, "b", b)
        object.__setattr__(self, "x0", _start_point(self.x0, self.f.domain, "x0"))
        y_tilde0 = (
            np.zeros(self.A.rows)
            if self.y_tilde0 is None
            else as_vector(self.y_tilde0, self.A.rows, "y_tilde0")
        )
        object.__setattr__(self, "y_tilde0", y_tilde0)

    @classmethod
    def constrained(
        cls,
        f: ProxOracle,
        A: LinearMap,
        b: RealVector,
        x0: Optional[RealVector] = None,
        y_tilde0: Optional[RealVector] = None,
    ) -> "SaddleProblem":
        b = as_vector(b, A.rows, "b")
        g = ProxOracle.linear(b, BoxSet.free(A.rows))
        return cls(f, g, A, b, x0, y_tilde0)

    @property
    def is_constrained(self) -> bool:
        return self.b is not None

    @property
    def X(self) -> BoxSet:
        return self.f.domain

    @property
    def Y(self) -> BoxSet:
        return self.g.domain

    def objective(self, x: RealVector) -> float:
        return self.f.value(x)


@dataclass(frozen=True, eq=False)
class SmoothSaddleProblem:
    """Saddle problem whose primal function is smooth and enters via its gradient."""

    f: SmoothOracle
    X: BoxSet
    g: ProxOracle
    A: LinearMap
    b: Optional[RealVector] = None
    x0: Optional[RealVector] = None
    y_tilde0: Optional[RealVector] = None

    def __post_init__(self) -> None:
        if self.A.cols != self.f.dim or self.X.dim != self.f.dim or self.A.rows != self.g.dim:
            raise ValueError(
                f"operator {self.A.shape} does not match f on R^{self.f.dim}, "
                f"X on R^{self.X.dim} and g on R^{self.g.dim}"
            )
        if self.b is not None:
            b = as_vector(self.b, self.A.rows, "b")
            if not (self.g.kind == "linear" and self.g.domain.is_free):
                raise ValueError("constrained mode needs g = <b, y> on a free Y")
            object.__setattr__(self, "b", b)
        object.__setattr__(self, "x0", _start_point(self.x0, self.X, "x0"))
        y_tilde0 = (
            np.zeros(self.A.rows)
            if self.y_tilde0 is None
            else as_vector(self.y_tilde0, self.A.rows, "y_tilde0")
        )
        object.__setattr__(self, "y_tilde0", y_tilde0)

    @classmethod
    def constrained(
        cls,
        f: SmoothOracle,
        X: BoxSet,
        A: LinearMap,
        b: RealVector,
        x0: Optional[RealVector] = None,
        y_tilde0: Optional[RealVector] = None,
    ) -> "SmoothSaddleProblem":
        b = as_vector(b, A.rows, "b")
        g = ProxOracle.linear(b, BoxSet.free(A.rows))
        return cls(f, X, g, A, b, x0, y_tilde0)

    @property
    def is_constrained(self) -> bool:
        return self.b is not None

    @property
    def Y(self) -> BoxSet:
        return self.g.domain

    def objective(self, x: RealVector) -> float:
        if not self.X.contains(x, tol=1e-9):
            return float("inf")
        return self.f.value(x)


@dataclass(frozen=True, eq=False)
class TwoBlockProblem:
    """min ``F(x) + G(w)`` subject to ``B w - K x = b``."""

    F: ProxOracle
    G_aug: AugmentedOracle
    K: LinearMap
    b: RealVector
    x0: Optional[RealVector] = None

    def __post_init__(self) -> None:
        _check_two_block(self.F.dim, self.K, self.G_aug, self.b)
        object.__setattr__(self, "b", as_vector(self.b, self.K.rows, "b"))
        object.__setattr__(self, "x0", _start_point(self.x0, self.F.domain, "x0"))

    @property
    def X(self) -> BoxSet:
        return self.F.domain

    @property
    def is_constrained(self) -> bool:
        return True

    def objective(self, x: RealVector, w: RealVector) -> float:
        return self.F.value(x) + self.G_aug.G.value(w)

    def rescaled(self, c: float) -> "TwoBlockProblem":
        return TwoBlockProblem(self.F, self.G_aug.rescaled(c), self.K, self.b, self.x0)


@dataclass(frozen=True, eq=False)
class SmoothTwoBlockProblem:
    """Two-block problem whose x-block function is smooth."""

    F: SmoothOracle
    X: BoxSet
    G_aug: AugmentedOracle
    K: LinearMap
    b: RealVector
    x0: Optional[RealVector] = None

    def __post_init__(self) -> None:
        if self.X.dim != self.F.dim:
            raise ValueError(f"X on R^{self.X.dim} does not match F on R^{self.F.dim}")
        _check_two_block(self.F.dim, self.K, self.G_aug, self.b)
        object.__setattr__(self, "b", as_vector(self.b, self.K.rows, "b"))
        object.__setattr__(self, "x0", _start_point(self.x0, self.X, "x0"))

    @property
    def is_constrained(self) -> bool:
        return True

    def objective(self, x: RealVector, w: RealVector) -> float:
        if not self.X.contains(x, tol=1e-9):
            return float("inf")
        return self.F.value(x) + self.G_aug.G.value(w)

    def rescaled(self, c: float) -> "SmoothTwoBlockProblem":
        return SmoothTwoBlockProblem(
            self.F, self.X, self.G_aug.rescaled(c), self.K, self.b, self.x0
        )


def _check_two_block(n1: int, K: LinearMap, G_aug: AugmentedOracle, b: RealVector) -> None:
    if K.cols != n1:
        raise ValueError(f"K has {K.cols} columns but F acts on R^{n1}")
    if G_aug.B.rows != K.rows:
        raise ValueError(f"B maps into R^{G_aug.B.rows} but K into R^{K.rows}")
    if np.asarray(b).shape != (K.rows,):
        raise ValueError(f"b must have length {K.rows}")


FAMILIES = (
    "box-bilinear",
    "constrained-qp",
    "two-block-qp",
    "lasso-as-saddle",
    "smooth-constrained",
)


@dataclass(frozen=True)
class ProblemSpec:
    """Everything needed to regenerate a benchmark instance bit for bit."""

    family: str
    n: int
    m: int
    seed: int
    n2: Optional[int] = None
    knobs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown problem family '{self.family}' (known: {FAMILIES})")
        if self.n < 1 or self.m < 1 or (self.n2 is not None and self.n2 < 1):
            raise ValueError("problem dimensions must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "n": self.n,
            "m": self.m,
            "n2": self.n2,
            "seed": self.seed,
            "knobs": dict(self.knobs),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ProblemSpec":
        return cls(
            family=data["family"],
            n=int(data["n"]),
            m=int(data["m"]),
            seed=int(data["seed"]),
            n2=None if data.get("n2") is None else int(data["n2"]),
            knobs=dict(data.get("knobs", {})),
        )


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Planted solution of a generated instance with its KKT residuals."""

    x_star: RealVector
    y_star: RealVector
    f_star: float
    w_star: Optional[RealVector] = None
    kkt_residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.kkt_residuals.values(), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x_star": self.x_star.tolist(),
            "y_star": self.y_star.tolist(),
            "w_star": None if self.w_star is None else self.w_star.tolist(),
            "f_star": self.f_star,
            "kkt_residuals": dict(self.kkt_residuals),
        }
