"""Real vectors, box sets and linear maps with forward/adjoint application."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

RealVector = NDArray[np.float64]

# Differences below this norm are treated as exact zeros.
TINY_NORM = 1e-150


def as_vector(
    values: ArrayLike, dim: Optional[int] = None, name: str = "vector"
) -> RealVector:
    """
    Convert input to a finite float64 1-D array.

    Args:
        values: Anything ``numpy.asarray`` accepts
        dim: Required length, if any
        name: Used in error messages

    Returns:
        A fresh float64 array

    Raises:
        ValueError: On wrong shape, wrong length or non-finite entries
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must have positive dimension")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BoxSet:
    """Coordinatewise box ``lower <= x <= upper``; bounds may be infinite."""

    lower: RealVector
    upper: RealVector

    def __post_init__(self) -> None:
        lower = np.atleast_1d(np.array(self.lower, dtype=np.float64))
        upper = np.atleast_1d(np.array(self.upper, dtype=np.float64))
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError(
                f"box bounds must be 1-D of equal length, got {lower.shape} and {upper.shape}"
            )
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("box bounds contain NaN")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("box bounds are empty")
        if np.any(lower > upper):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", _frozen(lower))
        object.__setattr__(self, "upper", _frozen(upper))

    @classmethod
    def free(cls, dim: int) -> "BoxSet":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def cube(cls, dim: int, radius: float = 1.0, center: float = 0.0) -> "BoxSet":
        return cls(np.full(dim, center - radius), np.full(dim, center + radius))

    @classmethod
    def point(cls, values: ArrayLike) -> "BoxSet":
        v = as_vector(values, name="point")
        return cls(v, v.copy())

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    @property
    def is_free(self) -> bool:
        return bool(np.all(self.lower == -np.inf) and np.all(self.upper == np.inf))

    def diameter(self) -> float:
        """Euclidean diameter; infinite iff some bound is infinite."""
        if not self.is_bounded:
            return float("inf")
        return float(np.linalg.norm(self.upper - self.lower))

    def radius_from(self, center: RealVector) -> float:
        """max over the box of ``||x - center||``."""
        if not self.is_bounded:
            return float("inf")
        c = np.asarray(center, dtype=np.float64)
        far = np.maximum(np.abs(c - self.lower), np.abs(self.upper - c))
        return float(np.linalg.norm(far))

    def project(self, x: RealVector) -> RealVector:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: RealVector, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(
            np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        )

    def scaled(self, c: float) -> "BoxSet":
        """Image of the box under ``x -> x / c`` for ``c > 0``."""
        if c <= 0.0:
            raise ValueError(f"scale must be positive, got {c}")
        return BoxSet(self.lower / c, self.upper / c)


class LinearMap(ABC):
    """A linear operator R^cols -> R^rows with forward and adjoint application."""

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise ValueError(f"operator shape must be positive, got ({rows}, {cols})")
        self.rows = int(rows)
        self.cols = int(cols)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def forward(self, x: RealVector) -> RealVector:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.cols:
            raise ValueError(
                f"forward expects a vector of length {self.cols}, got shape {x.shape}"
            )
        return self._matvec(x)

    def adjoint(self, y: RealVector) -> RealVector:
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 1 or y.shape[0] != self.rows:
            raise ValueError(
                f"adjoint expects a vector of length {self.rows}, got shape {y.shape}"
            )
        return self._rmatvec(y)

    @abstractmethod
    def _matvec(self, x: RealVector) -> RealVector:
        ...

    @abstractmethod
    def _rmatvec(self, y: RealVector) -> RealVector:
        ...

    @abstractmethod
    def to_dense(self) -> NDArray[np.float64]:
        ...

    def diagonal(self) -> Optional[RealVector]:
        """Diagonal entries if the map is square and diagonal, else None."""
        if self.rows != self.cols:
            return None
        dense = self.to_dense()
        diag = np.diag(dense).copy()
        if np.count_nonzero(dense - np.diag(diag)) != 0:
            return None
        return diag

    def gram(self) -> NDArray[np.float64]:
        """Dense ``M^T M``."""
        dense = self.to_dense()
        return dense.T @ dense

    def scaled(self, c: float) -> "ComposedMap":
        return ComposedMap(c, [self])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(rows={self.rows}, cols={self.cols})"


class DenseMap(LinearMap):
    """Operator stored as a dense row-major matrix."""

    def __init__(self, matrix: ArrayLike):
        mat = np.array(matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError(f"dense operator must be 2-D, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("dense operator has non-finite entries")
        super().__init__(*mat.shape)
        mat.flags.writeable = False
        self.matrix = mat

    @classmethod
    def identity(cls, n: int) -> "DenseMap":
        return cls(np.eye(n))

    def _matvec(self, x: RealVector) -> RealVector:
        return self.matrix @ x

    def _rmatvec(self, y: RealVector) -> RealVector:
        return self.matrix.T @ y

    def to_dense(self) -> NDArray[np.float64]:
        return np.array(self.matrix)


class SparseMap(LinearMap):
    """Operator given by coordinate triplets; duplicate entries sum."""

    def __init__(
        self,
        rows: int,
        cols: int,
        row_idx: Sequence[int],
        col_idx: Sequence[int],
        values: Sequence[float],
    ):
        super().__init__(rows, cols)
        vals = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ValueError("sparse operator has non-finite entries")
        coo = sp.coo_matrix(
            (vals, (np.asarray(row_idx, dtype=np.int64), np.asarray(col_idx, dtype=np.int64))),
            shape=(rows, cols),
        )
        self.matrix = coo.tocsr()
        self.matrix.sum_duplicates()
        self._matrix_t = self.matrix.T.tocsr()

    @classmethod
    def from_triplets(
        cls, rows: int, cols: int, triplets: Iterable[Tuple[int, int, float]]
    ) -> "SparseMap":
        items = list(triplets)
        if not items:
            return cls(rows, cols, [], [], [])
        i, j, v = zip(*items)
        return cls(rows, cols, i, j, v)

    def _matvec(self, x: RealVector) -> RealVector:
        return np.asarray(self.matrix @ x, dtype=np.float64)

    def _rmatvec(self, y: RealVector) -> RealVector:
        return np.asarray(self._matrix_t @ y, dtype=np.float64)

    def to_dense(self) -> NDArray[np.float64]:
        return self.matrix.toarray()


class ComposedMap(LinearMap):
    """``scale * maps[0] @ maps[1] @ ... @ maps[-1]``."""

    def __init__(self, scale: float, maps: Sequence[LinearMap]):
        if not maps:
            raise ValueError("composition needs at least one map")
        if not np.isfinite(scale):
            raise ValueError(f"composition scale must be finite, got {scale}")
        for outer, inner in zip(maps[:-1], maps[1:]):
            if outer.cols != inner.rows:
                raise ValueError(
                    f"cannot compose {outer.shape} after {inner.shape}"
                )
        super().__init__(maps[0].rows, maps[-1].cols)
        self.scale = float(scale)
        self.maps = tuple(maps)

    def _matvec(self, x: RealVector) -> RealVector:
        out = x
        for op in reversed(self.maps):
            out = op.forward(out)
        return self.scale * out

    def _rmatvec(self, y: RealVector) -> RealVector:
        out = y
        for op in self.maps:
            out = op.adjoint(out)
        return self.scale * out

    def to_dense(self) -> NDArray[np.float64]:
        dense = self.maps[0].to_dense()
        for op in self.maps[1:]:
            dense = dense @ op.to_dense()
        return self.scale * dense


def forward(op: LinearMap, x: RealVector) -> RealVector:
    """Apply ``op`` to ``x``."""
    return op.forward(x)


def adjoint(op: LinearMap, y: RealVector) -> RealVector:
    """Apply the transpose of ``op`` to ``y``."""
    return op.adjoint(y)


def spectral_norm_reference(op: LinearMap, iters: int = 200, seed: int = 0) -> float:
    """
    Power-method estimate of ``||op||``.

    Only tests and reference oracles call this; adaptive solvers never do.
    The estimate is nondecreasing in ``iters`` for a fixed seed.

    Args:
        op: Operator to measure
        iters: Number of power iterations on ``op^T op``
        seed: Seed of the random start vector

    Returns:
        Estimated largest singular value (0 for the zero operator)
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.cols)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = op.adjoint(op.forward(v))
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
    return float(np.linalg.norm(op.forward(v)))


def load_dense_csv(path: str) -> DenseMap:
    """Load a header-free row-major CSV matrix."""
    frame = pd.read_csv(path, header=None, dtype=np.float64)
    return DenseMap(frame.to_numpy())


def load_sparse_csv(
    path: str, shape: Optional[Tuple[int, int]] = None
) -> SparseMap:
    """
    Load ``i,j,value`` triplets (zero-based, header-free).

    The shape defaults to one past the largest indices.
    """
    frame = pd.read_csv(
        path,
        header=None,
        names=["i", "j", "value"],
        dtype={"i": np.int64, "j": np.int64, "value": np.float64},
    )
    if shape is None:
        shape = (int(frame["i"].max()) + 1, int(frame["j"].max()) + 1)
    return SparseMap(
        shape[0],
        shape[1],
        frame["i"].to_numpy(),
        frame["j"].to_numpy(),
        frame["value"].to_numpy(),
    )


def load_vector_csv(path: str) -> RealVector:
    """Load a vector stored as one value per line."""
    frame = pd.read_csv(path, header=None, dtype=np.float64)
    return as_vector(frame.to_numpy().ravel(), name=path)


MapLike = Union[LinearMap, ArrayLike]


def as_map(op: MapLike) -> LinearMap:
    """Wrap plain arrays as ``DenseMap``; pass ``LinearMap`` through."""
    if isinstance(op, LinearMap):
        return op
    return DenseMap(np.atleast_2d(np.asarray(op, dtype=np.float64)))
