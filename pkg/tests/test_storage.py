import json

import h5py
import numpy as np
import pandas as pd
import pytest

from src.storage.data_manager import RunStorage, read_trace, write_json, write_trace
from src.storage.data_models import TraceBuffer, TraceRecord


def make_record(t, bound=None, grad_calls=None):
    return TraceRecord(
        t=t,
        eta_t=0.1 / 3.0 * t,
        tau_t=1.0 / 7.0,
        tilde_tau_t=None,
        L_op_t=np.sqrt(2.0),
        L_smooth_t=None,
        bound=bound,
        violation=None,
        identity_residual=None,
        subproblem_residual=None,
        grad_calls=grad_calls,
    )


def test_trace_round_trip_is_exact(tmp_path):
    records = [
        make_record(1),
        make_record(2, bound=1e-300, grad_calls=2),
        make_record(3, 2.0 / 3.0),
    ]
    path = write_trace(tmp_path / "trace.csv", records)
    assert read_trace(path) == records


def test_trace_header_in_field_order(tmp_path):
    path = write_trace(tmp_path / "trace.csv", [make_record(1)])
    header = path.read_text().splitlines()[0]
    assert header.split(",") == TraceRecord.columns()


def test_read_trace_rejects_foreign_csv(tmp_path):
    path = tmp_path / "other.csv"
    pd.DataFrame({"a": [1]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        read_trace(path)


def test_buffer_requires_increasing_t():
    buffer = TraceBuffer()
    buffer.add(make_record(2))
    with pytest.raises(ValueError):
        buffer.add(make_record(2))
    with pytest.raises(ValueError):
        TraceBuffer(stride=0)


def test_json_sorted_and_non_finite_as_null(tmp_path):
    path = write_json(tmp_path / "doc.json", {"b": float("inf"), "a": np.float64(0.1), "c": [1, 2]})
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": 0.1, "b": None, "c": [1, 2]}


def test_run_storage_files(tmp_path):
    storage = RunStorage({"storage": {}}, tmp_path / "run", run_id="demo")
    storage.save_trace([make_record(1)])
    storage.save_certificate({"k": 1})
    info = storage.finish("ac-pdhg", 1, "max_iters")
    summary = json.loads(storage.save_summary({"status": "ok"}).read_text())
    assert summary["run"]["trace_files"] == ["trace.csv"]
    assert summary["run"]["algorithm"] == "ac-pdhg"
    assert info.status == "max_iters"
    assert storage.archive([make_record(1)], {}) is None


def test_hdf5_archive_appends(tmp_path):
    storage = RunStorage({"storage": {"hdf5_archive": True}}, tmp_path, run_id="demo")
    storage.archive([make_record(1), make_record(2, grad_calls=4)], {"algorithm": "ac-pdhg"})
    path = storage.archive([make_record(3)], {"mu_d": None})
    with h5py.File(path, "r") as f:
        assert f["trace/t"][:].tolist() == [1.0, 2.0, 3.0]
        assert np.isnan(f["trace/grad_calls"][0])
        assert f["trace/grad_calls"][1] == 4.0
        assert f["trace"].attrs["algorithm"] == "ac-pdhg"
        assert f.attrs["run_id"] == "demo"
