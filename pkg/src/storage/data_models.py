"""Data models for solver traces, certificates and runs."""

import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd

OPTIONAL_TRACE_FIELDS = (
    "tilde_tau_t",
    "L_smooth_t",
    "bound",
    "violation",
    "identity_residual",
    "subproblem_residual",
    "grad_calls",
)


@dataclass
class TraceRecord:
    """One traced iteration of a solve."""

    t: int
    eta_t: float
    tau_t: float
    tilde_tau_t: Optional[float]
    L_op_t: float
    L_smooth_t: Optional[float]
    bound: Optional[float]
    violation: Optional[float]
    identity_residual: Optional[float]
    subproblem_residual: Optional[float]
    grad_calls: Optional[int]
    wall_clock_ns: int = 0

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, row: Dict[str, Any]) -> "TraceRecord":
        values = {}
        for name in cls.columns():
            value = row.get(name)
            if name in OPTIONAL_TRACE_FIELDS and (
                value is None or (isinstance(value, float) and math.isnan(value))
            ):
                values[name] = None
            elif name in ("t", "wall_clock_ns", "grad_calls"):
                values[name] = int(value)
            else:
                values[name] = float(value)
        return cls(**values)


class TraceBuffer:
    """Ordered buffer of trace records with strictly increasing ``t``."""

    def __init__(self, stride: int = 1):
        """
        Initialize trace buffer.

        Args:
            stride: Record every ``stride``-th iteration
        """
        if stride < 1:
            raise ValueError(f"trace stride must be >= 1, got {stride}")
        self.stride = stride
        self.records: List[TraceRecord] = []

    def wants(self, t: int) -> bool:
        return t % self.stride == 0

    def add(self, record: TraceRecord) -> None:
        """
        Append a record.

        Raises:
            ValueError: If ``t`` does not increase
        """
        if self.records and record.t <= self.records[-1].t:
            raise ValueError(
                f"trace t must increase: {record.t} after {self.records[-1].t}"
            )
        self.records.append(record)

    @property
    def last_t(self) -> Optional[int]:
        return self.records[-1].t if self.records else None

    def to_dataframe(self) -> pd.DataFrame:
        """Records as a DataFrame with columns in field order."""
        frame = pd.DataFrame(
            [r.to_dict() for r in self.records], columns=TraceRecord.columns()
        )
        # keep optional integer columns integral when present
        frame["grad_calls"] = frame["grad_calls"].astype("Int64")
        return frame

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass
class Certificate:
    """Computable certificate values at the final iterate of a solve."""

    algorithm: str
    k: int
    mu_d: float
    beta: float
    alpha: float
    eta1: float
    L_hat: float
    curvature: float
    gap_bound: Optional[float] = None
    violation: Optional[float] = None
    dual_residual: Optional[float] = None
    identity_residual: Optional[float] = None
    E1: Optional[float] = None
    E2: Optional[float] = None
    D_X: Optional[float] = None
    D_Y: Optional[float] = None
    line_search_halvings: int = 0

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


@dataclass
class ConstrainedCertificate:
    """Measured constrained residuals next to their certified bounds."""

    k: int
    optimality_gap: Optional[float]
    violation: float
    mu_ytilde_norm: float
    gap_rhs: float
    violation_rhs: float
    bracket: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunInfo:
    """Information about one solver run written to disk."""

    run_id: str
    algorithm: str
    start_time: datetime = field(default_factory=datetime.now)
    end_time: Optional[datetime] = None
    iterations: int = 0
    status: str = "pending"
    output_dir: Optional[str] = None
    trace_files: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            "run_id": self.run_id,
            "algorithm": self.algorithm,
            "start_time": self.start_time.isoformat(),
            "end_time": self.end_time.isoformat() if self.end_time else None,
            "iterations": self.iterations,
            "status": self.status,
            "output_dir": self.output_dir,
            "trace_files": list(self.trace_files),
        }
