"""
Seeded benchmark generators with planted solutions.

Every instance is built backwards from a chosen primal-dual pair, so its
ground truth is exact and independent of any solver.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from ..core.oracles import AugmentedOracle, ProxOracle, SmoothOracle
from ..core.vector_core import BoxSet, DenseMap, RealVector
from ..utils.config import RUN_SCHEMA_VERSION
from ..utils.errors import ConfigError, SolverError
from ..utils.logger import get_logger
from .models import (
    GroundTruth,
    ProblemSpec,
    SaddleProblem,
    SmoothSaddleProblem,
    SmoothTwoBlockProblem,
    TwoBlockProblem,
)

logger = get_logger("problems.generators")

MAX_REDRAWS = 10
PLANT_TOL = 1e-10

VIEWS = {
    "box-bilinear": ("saddle", "smooth_saddle"),
    "constrained-qp": ("saddle", "smooth_saddle"),
    "smooth-constrained": ("smooth_saddle",),
    "two-block-qp": ("two_block", "smooth_two_block"),
    "lasso-as-saddle": ("saddle",),
}


def _box(dim: int, radius: float) -> BoxSet:
    return BoxSet.cube(dim, radius)


def _draw_full_rank(
    rng: np.random.Generator, rows: int, cols: int, scale: float
) -> np.ndarray:
    """Gaussian matrix of full rank, redrawn up to ``MAX_REDRAWS`` times."""
    for attempt in range(MAX_REDRAWS):
        M = rng.standard_normal((rows, cols)) * scale / np.sqrt(cols)
        if np.linalg.matrix_rank(M) == min(rows, cols):
            return M
        logger.debug(f"rank-deficient draw {attempt + 1}, redrawing")
    raise SolverError(f"no full-rank {rows}x{cols} draw after {MAX_REDRAWS} attempts")


def stationarity_residual(x: RealVector, grad: RealVector, box: BoxSet) -> float:
    """``||x - P_X(x - grad)||``: zero iff ``-grad`` lies in the normal cone of X at x."""
    return float(np.linalg.norm(x - box.project(x - grad)))


def soft_threshold(v: RealVector, lam: RealVector) -> RealVector:
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


@dataclass(eq=False)
class ProblemInstance:
    """A generated instance: spec, raw arrays and planted truth, with solver views."""

    spec: ProblemSpec
    data: Dict[str, Any]
    truth: GroundTruth = field(init=False)

    @property
    def family(self) -> str:
        return self.spec.family

    def _require(self, view: str) -> None:
        if view not in VIEWS[self.family]:
            raise ConfigError(
                f"family '{self.family}' has no {view} form (available: {VIEWS[self.family]})"
            )

    @property
    def X(self) -> BoxSet:
        return self.data["X"]

    def saddle(self) -> SaddleProblem:
        self._require("saddle")
        d = self.data
        A = DenseMap(d["A"])
        if self.family == "box-bilinear":
            return SaddleProblem(
                ProxOracle.linear(d["c"], d["X"]), ProxOracle.linear(d["d"], d["Y"]), A
            )
        if self.family == "constrained-qp":
            return SaddleProblem.constrained(
                ProxOracle.quadratic(d["p"], d["q"], d["X"]), A, d["b"]
            )
        f = ProxOracle.l1(d["lam"], d["X"])
        g = ProxOracle.quadratic(np.ones(A.rows), d["d"], BoxSet.free(A.rows))
        return SaddleProblem(f, g, A)

    def smooth_saddle(self) -> SmoothSaddleProblem:
        self._require("smooth_saddle")
        d = self.data
        A = DenseMap(d["A"])
        if self.family == "box-bilinear":
            return SmoothSaddleProblem(
                SmoothOracle.linear(d["c"]), d["X"], ProxOracle.linear(d["d"], d["Y"]), A
            )
        P = np.diag(d["p"]) if self.family == "constrained-qp" else d["P"]
        return SmoothSaddleProblem.constrained(SmoothOracle.quadratic(P, d["q"]), d["X"], A, d["b"])

    def _augmented(self) -> AugmentedOracle:
        d = self.data
        W = BoxSet.free(d["B"].shape[1])
        return AugmentedOracle(ProxOracle.quadratic(d["p_w"], d["q_w"], W), DenseMap(d["B"]))

    def two_block(self) -> TwoBlockProblem:
        self._require("two_block")
        d = self.data
        F = ProxOracle.quadratic(d["p_x"], d["q_x"], d["X"])
        return TwoBlockProblem(F, self._augmented(), DenseMap(d["K"]), d["b"])

    def smooth_two_block(self) -> SmoothTwoBlockProblem:
        self._require("smooth_two_block")
        d = self.data
        F = SmoothOracle.quadratic(np.diag(d["p_x"]), d["q_x"])
        return SmoothTwoBlockProblem(F, d["X"], self._augmented(), DenseMap(d["K"]), d["b"])

    def primal_objective(self, x: RealVector, w: Optional[RealVector] = None) -> float:
        """Objective of the underlying minimization problem (constraints not checked)."""
        d = self.data
        x = np.asarray(x, dtype=np.float64)
        if self.family == "box-bilinear":
            radius = d["Y"].upper
            return float(d["c"] @ x + np.sum(radius * np.abs(d["A"] @ x - d["d"])))
        if self.family == "constrained-qp":
            return float(0.5 * np.sum(d["p"] * x * x) + d["q"] @ x)
        if self.family == "smooth-constrained":
            return float(0.5 * x @ d["P"] @ x + d["q"] @ x)
        if self.family == "lasso-as-saddle":
            r = d["A"] @ x - d["d"]
            return float(0.5 * r @ r + np.sum(d["lam"] * np.abs(x)))
        if w is None:
            raise ValueError("two-block objective needs w")
        w = np.asarray(w, dtype=np.float64)
        F = 0.5 * np.sum(d["p_x"] * x * x) + d["q_x"] @ x
        G = 0.5 * np.sum(d["p_w"] * w * w) + d["q_w"] @ w
        return float(F + G)

    def kkt_residuals(
        self, x: RealVector, y: RealVector, w: Optional[RealVector] = None
    ) -> Dict[str, float]:
        """Optimality residuals of a candidate pair, from the raw arrays alone."""
        d = self.data
        if self.family == "box-bilinear":
            A = d["A"]
            return {
                "primal_stationarity": stationarity_residual(x, d["c"] + A.T @ y, d["X"]),
                "dual_stationarity": stationarity_residual(y, d["d"] - A @ x, d["Y"]),
            }
        if self.family in ("constrained-qp", "smooth-constrained"):
            A = d["A"]
            grad = d["p"] * x if self.family == "constrained-qp" else d["P"] @ x
            return {
                "primal_stationarity": stationarity_residual(x, grad + d["q"] + A.T @ y, d["X"]),
                "feasibility": float(np.linalg.norm(A @ x - d["b"])),
            }
        if self.family == "lasso-as-saddle":
            A = d["A"]
            return {
                "primal_stationarity": float(
                    np.linalg.norm(x - soft_threshold(x - A.T @ y, d["lam"]))
                ),
                "dual_stationarity": float(np.linalg.norm(y - (A @ x - d["d"]))),
            }
        if w is None:
            raise ValueError("two-block residuals need w")
        K, B = d["K"], d["B"]
        return {
            "x_stationarity": stationarity_residual(
                x, d["p_x"] * x + d["q_x"] + K.T @ y, d["X"]
            ),
            "w_stationarity": float(np.linalg.norm(d["p_w"] * w + d["q_w"] - B.T @ y)),
            "feasibility": float(np.linalg.norm(B @ w - K @ x - d["b"])),
        }

    def certify(self, x: RealVector, y: RealVector, w: Optional[RealVector] = None) -> GroundTruth:
        residuals = self.kkt_residuals(x, y, w)
        return GroundTruth(
            x_star=np.asarray(x, dtype=np.float64),
            y_star=np.asarray(y, dtype=np.float64),
            f_star=self.primal_objective(x, w),
            w_star=None if w is None else np.asarray(w, dtype=np.float64),
            kkt_residuals=residuals,
        )


def _knob(spec: ProblemSpec, name: str, default: Any) -> Any:
    return spec.knobs.get(name, default)


def _gen_box_bilinear(spec: ProblemSpec, rng: np.random.Generator) -> Tuple[Dict[str, Any], Tuple]:
    n, m = spec.n, spec.m
    radius = float(_knob(spec, "radius", 1.0))
    A = _draw_full_rank(rng, m, n, float(_knob(spec, "op_scale", 1.0)))
    x_star = rng.uniform(-0.5 * radius, 0.5 * radius, n)
    y_star = rng.uniform(-0.5 * radius, 0.5 * radius, m)
    data = {
        "A": A,
        "c": -A.T @ y_star,
        "d": A @ x_star,
        "X": _box(n, radius),
        "Y": _box(m, radius),
    }
    return data, (x_star, y_star, None)


def _gen_constrained(
    spec: ProblemSpec, rng: np.random.Generator, dense_hessian: bool
) -> Tuple[Dict[str, Any], Tuple]:
    n, m = spec.n, spec.m
    if m >= n:
        raise ConfigError(f"constrained families need m < n, got m={m}, n={n}")
    radius = float(_knob(spec, "radius", 1.0))
    A = _draw_full_rank(rng, m, n, float(_knob(spec, "op_scale", 1.0)))
    x_star = rng.uniform(-0.5 * radius, 0.5 * radius, n)
    y_star = rng.standard_normal(m)
    low, high = _knob(spec, "curvature_range", [0.5, 2.0])
    data: Dict[str, Any] = {"A": A, "b": A @ x_star, "X": _box(n, radius)}
    if dense_hessian:
        M = rng.standard_normal((n, n)) / np.sqrt(n)
        P = M.T @ M + float(_knob(spec, "ridge", 0.1)) * np.eye(n)
        P = 0.5 * (P + P.T)
        data["P"] = P
        data["q"] = -P @ x_star - A.T @ y_star
    else:
        p = rng.uniform(low, high, n)
        data["p"] = p
        data["q"] = -p * x_star - A.T @ y_star
    return data, (x_star, y_star, None)


def _gen_two_block(spec: ProblemSpec, rng: np.random.Generator) -> Tuple[Dict[str, Any], Tuple]:
    n, m = spec.n, spec.m
    n2 = spec.n2 if spec.n2 is not None else m
    radius = float(_knob(spec, "radius", 1.0))
    norm_ratio = float(_knob(spec, "norm_ratio", 1.0))
    K = _draw_full_rank(rng, m, n, float(_knob(spec, "op_scale", 1.0)))
    if _knob(spec, "b_kind", "dense") == "diagonal":
        if n2 != m:
            raise ConfigError("diagonal B needs n2 == m")
        B = np.diag(rng.uniform(1.0, 2.0, m))
    else:
        B = rng.standard_normal((m, n2))
    B = B * (norm_ratio * np.linalg.norm(K, 2) / np.linalg.norm(B, 2))
    low, high = _knob(spec, "curvature_range", [0.5, 2.0])
    p_x = rng.uniform(low, high, n)
    p_w = rng.uniform(low, high, n2)
    x_star = rng.uniform(-0.5 * radius, 0.5 * radius, n)
    w_star = rng.standard_normal(n2)
    y_star = rng.standard_normal(m)
    data = {
        "K": K,
        "B": B,
        "b": B @ w_star - K @ x_star,
        "p_x": p_x,
        "q_x": -p_x * x_star - K.T @ y_star,
        "p_w": p_w,
        "q_w": B.T @ y_star - p_w * w_star,
        "X": _box(n, radius),
    }
    return data, (x_star, y_star, w_star)


def _gen_lasso(spec: ProblemSpec, rng: np.random.Generator) -> Tuple[Dict[str, Any], Tuple]:
    """
    ``min 1/2 ||C x - d||^2 + lam ||x||_1`` as ``max_y <C x, y> - 1/2 ||y||^2 - <d, y>``.

    Columns of C are shifted along y* so that ``C^T y*`` equals a chosen
    subgradient of ``-lam ||.||_1`` at the sparse x*.
    """
    n, m = spec.n, spec.m
    lam = float(_knob(spec, "lam", 0.1))
    support = int(_knob(spec, "support", max(1, n // 4)))
    C = _draw_full_rank(rng, m, n, float(_knob(spec, "op_scale", 1.0)))
    x_star = np.zeros(n)
    idx = rng.choice(n, size=support, replace=False)
    x_star[idx] = rng.choice([-1.0, 1.0], size=support) * rng.uniform(0.5, 1.5, support)
    y_star = rng.standard_normal(m)
    target = -lam * rng.uniform(-0.5, 0.5, n)
    target[idx] = -lam * np.sign(x_star[idx])
    C = C + np.outer(y_star, target - C.T @ y_star) / float(y_star @ y_star)
    data = {
        "A": C,
        "d": C @ x_star - y_star,
        "lam": np.full(n, lam),
        "X": BoxSet.free(n),
    }
    return data, (x_star, y_star, None)


GeneratorFn = Callable[[ProblemSpec, np.random.Generator], Tuple[Dict[str, Any], Tuple]]

GENERATORS: Dict[str, GeneratorFn] = {
    "box-bilinear": _gen_box_bilinear,
    "constrained-qp": lambda spec, rng: _gen_constrained(spec, rng, dense_hessian=False),
    "smooth-constrained": lambda spec, rng: _gen_constrained(spec, rng, dense_hessian=True),
    "two-block-qp": _gen_two_block,
    "lasso-as-saddle": _gen_lasso,
}


def generate(spec: ProblemSpec) -> ProblemInstance:
    """
    Build the instance described by ``spec``; identical specs give identical arrays.

    Raises:
        ConfigError: On dimensions the family cannot accommodate
        SolverError: If a full-rank draw or the planted certificate fails
    """
    rng = np.random.default_rng(spec.seed)
    data, (x_star, y_star, w_star) = GENERATORS[spec.family](spec, rng)
    instance = ProblemInstance(spec, data)
    instance.truth = instance.certify(x_star, y_star, w_star)
    if instance.truth.max_residual > PLANT_TOL:
        raise SolverError(
            f"planted {spec.family} solution fails KKT check: {instance.truth.kkt_residuals}"
        )
    logger.debug(f"generated {spec.family} n={spec.n} m={spec.m} seed={spec.seed}")
    return instance


def gen_box_bilinear(n: int, m: int, seed: int, **knobs: Any) -> ProblemInstance:
    return generate(ProblemSpec("box-bilinear", n, m, seed, knobs=knobs))


def gen_constrained_qp(
    n: int, m: int, seed: int, smooth: bool = False, **knobs: Any
) -> Tuple[Union[SaddleProblem, SmoothSaddleProblem], GroundTruth]:
    """Equality-constrained QP over a box; prox-friendly or smooth view."""
    instance = generate(ProblemSpec("constrained-qp", n, m, seed, knobs=knobs))
    problem = instance.smooth_saddle() if smooth else instance.saddle()
    return problem, instance.truth


def gen_smooth_constrained(
    n: int, m: int, seed: int, **knobs: Any
) -> Tuple[SmoothSaddleProblem, GroundTruth]:
    instance = generate(ProblemSpec("smooth-constrained", n, m, seed, knobs=knobs))
    return instance.smooth_saddle(), instance.truth


def gen_two_block(
    n1: int,
    n2: int,
    m: int,
    seed: int,
    norm_ratio: float = 1.0,
    smooth: bool = False,
    **knobs: Any,
) -> Tuple[Union[TwoBlockProblem, SmoothTwoBlockProblem], GroundTruth]:
    """Two-block QP with ``||B|| / ||K|| = norm_ratio``."""
    knobs = dict(knobs, norm_ratio=norm_ratio)
    instance = generate(ProblemSpec("two-block-qp", n1, m, seed, n2=n2, knobs=knobs))
    problem = instance.smooth_two_block() if smooth else instance.two_block()
    return problem, instance.truth


def gen_lasso(n: int, m: int, seed: int, **knobs: Any) -> ProblemInstance:
    return generate(ProblemSpec("lasso-as-saddle", n, m, seed, knobs=knobs))


def save_problem(instance: ProblemInstance, path: Union[str, Path]) -> Path:
    """Write spec and planted truth as a replayable JSON document."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "schema_version": RUN_SCHEMA_VERSION,
        "problem": instance.spec.to_dict(),
        "truth": instance.truth.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
    return path


def load_problem(path: Union[str, Path]) -> ProblemInstance:
    """
    Regenerate an instance from its JSON document and check the stored truth.

    Raises:
        ConfigError: If the document is malformed or the truth does not match
    """
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in problem file: {e}")
    if document.get("schema_version") != RUN_SCHEMA_VERSION:
        raise ConfigError(f"Unsupported problem schema_version: {document.get('schema_version')}")
    try:
        spec = ProblemSpec.from_dict(document["problem"])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Invalid problem description: {e}")
    instance = generate(spec)
    stored = document.get("truth")
    if stored is not None and not np.array_equal(
        np.asarray(stored["x_star"]), instance.truth.x_star
    ):
        raise ConfigError(f"stored truth in {path} does not match the regenerated instance")
    return instance
