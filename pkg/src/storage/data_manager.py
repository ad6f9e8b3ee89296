"""Run storage for traces, certificates and summaries."""

import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import h5py
import numpy as np
import pandas as pd

from ..utils.config import RUN_SCHEMA_VERSION
from ..utils.logger import get_logger
from .data_models import RunInfo, TraceBuffer, TraceRecord

FLOAT_FORMAT = "%.17g"


def _jsonable(value: Any) -> Any:
    """Make numpy scalars/arrays and non-finite floats JSON friendly."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Union[str, Path], document: Dict[str, Any]) -> Path:
    """Write ``document`` with sorted keys; floats keep their repr digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(document), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_trace(path: Union[str, Path], records: Iterable[TraceRecord]) -> Path:
    """Trace CSV in ``TraceRecord`` field order; optional fields become empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = TraceBuffer()
    for record in records:
        buffer.add(record)
    buffer.to_dataframe().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_trace(path: Union[str, Path]) -> List[TraceRecord]:
    """
    Parse a trace CSV written by :func:`write_trace`.

    Raises:
        ValueError: If the header does not match the trace columns
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != TraceRecord.columns():
        raise ValueError(f"unexpected trace columns in {path}: {list(frame.columns)}")
    return [TraceRecord.from_dict(row) for row in frame.to_dict(orient="records")]


class RunStorage:
    """Owns one run's output directory and the files written into it."""

    def __init__(self, config: Dict[str, Any], output_dir: Union[str, Path], run_id: str):
        """
        Initialize run storage.

        Args:
            config: Application configuration (``storage`` section is read)
            output_dir: Directory receiving this run's files
            run_id: Identifier recorded in the summary and HDF5 attributes
        """
        self.config = config.get("storage", {})
        self.logger = get_logger("storage")
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.hdf5_enabled = bool(self.config.get("hdf5_archive", False))
        self.info = RunInfo(run_id=run_id, algorithm="", output_dir=str(self.output_dir))

    def trace_path(self, suffix: Optional[str] = None) -> Path:
        name = "trace.csv" if suffix is None else f"trace_{suffix}.csv"
        return self.output_dir / name

    def save_trace(
        self, records: List[TraceRecord], suffix: Optional[str] = None
    ) -> Path:
        path = write_trace(self.trace_path(suffix), records)
        self.info.trace_files.append(path.name)
        self.logger.debug(f"wrote {len(records)} trace records to {path}")
        return path

    def save_certificate(self, document: Dict[str, Any]) -> Path:
        path = write_json(self.output_dir / "certificate.json", document)
        self.logger.debug(f"wrote certificate to {path}")
        return path

    def save_summary(self, document: Dict[str, Any], name: str = "summary.json") -> Path:
        document = dict(document, run=self.info.to_dict())
        path = write_json(self.output_dir / name, document)
        self.logger.info(f"wrote summary to {path}")
        return path

    def save_compare_table(self, frame: pd.DataFrame) -> Path:
        path = self.output_dir / "compare.csv"
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def archive(
        self, records: List[TraceRecord], attrs: Dict[str, Any], group: str = "trace"
    ) -> Optional[Path]:
        """
        Append trace columns to ``run.h5`` as resizable datasets.

        Does nothing unless ``storage.hdf5_archive`` is set.
        """
        if not self.hdf5_enabled:
            return None
        path = self.output_dir / "run.h5"
        frame = TraceBuffer()
        for record in records:
            frame.add(record)
        columns = frame.to_dataframe()
        try:
            with h5py.File(path, "a") as f:
                grp = f.require_group(group)
                for name in TraceRecord.columns():
                    values = columns[name].astype("float64").to_numpy(na_value=np.nan)
                    if name not in grp:
                        grp.create_dataset(
                            name, (0,), dtype="f8", chunks=(1024,), maxshape=(None,)
                        )
                    dataset = grp[name]
                    start = dataset.shape[0]
                    dataset.resize((start + len(values),))
                    dataset[start:] = values
                f.attrs["schema_version"] = RUN_SCHEMA_VERSION
                f.attrs["run_id"] = self.info.run_id
                for key, value in attrs.items():
                    grp.attrs[key] = "" if value is None else value
        except Exception as e:
            self.logger.error(f"Failed to write HDF5 archive: {e}")
            raise
        self.logger.debug(f"archived {len(records)} records to {path}:{group}")
        return path

    def finish(self, algorithm: str, iterations: int, status: str) -> RunInfo:
        self.info.algorithm = algorithm
        self.info.iterations = iterations
        self.info.status = status
        self.info.end_time = datetime.now()
        return self.info
