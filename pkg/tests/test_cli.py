import json

import pandas as pd
import pytest

import main
from src.storage.data_manager import read_trace
from src.utils.errors import DivergenceError

TINY_QP = {
    "name": "tiny",
    "algorithm": "ac-pdhg",
    "problem": {"family": "constrained-qp", "n": 6, "m": 2, "seed": 7},
    "scheduler": {"mu_d": 0.01},
    "stop": {"max_iters": 200},
}


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("ACPD_OUTPUT_DIR", raising=False)


def cli(defaults_path, *args):
    return main.main(["--defaults", defaults_path, *args])


def test_run_writes_trace_and_certificate(tmp_path, defaults_path, write_run_config, capsys):
    path = write_run_config(TINY_QP)
    assert cli(defaults_path, "--out", str(tmp_path / "out"), "run", path) == 0

    run_dir = tmp_path / "out" / "tiny" / "ac-pdhg"
    trace = read_trace(run_dir / "trace.csv")
    assert [r.t for r in trace] == list(range(1, 201))
    assert all(r.tilde_tau_t is None for r in trace)

    certificate = json.loads((run_dir / "certificate.json").read_text())
    assert certificate["k"] == 200
    assert certificate["provenance"]["problem"]["seed"] == 7
    assert certificate["constrained"]["violation"] <= certificate["constrained"]["violation_rhs"]

    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["status"] == "max_iters"
    assert "iterations: 200" in capsys.readouterr().out


def test_bad_alpha_exits_with_config_error(defaults_path, write_run_config, capsys):
    path = write_run_config(dict(TINY_QP, scheduler={"mu_d": 0.01, "alpha": 1.5}))
    assert cli(defaults_path, "run", path) == 2
    assert "alpha out of range" in capsys.readouterr().err


def test_incompatible_algorithm(defaults_path, write_run_config, capsys):
    path = write_run_config(dict(TINY_QP, algorithm="ac-admm"))
    assert cli(defaults_path, "run", path) == 2
    assert "has no two_block form" in capsys.readouterr().err


def test_missing_run_config(defaults_path):
    assert cli(defaults_path, "run", "nowhere.json") == 2


def test_divergence_exit_code(defaults_path, write_run_config, monkeypatch, capsys):
    def diverge(*args, **kwargs):
        raise DivergenceError(5, "x")

    monkeypatch.setattr(main, "run", diverge)
    assert cli(defaults_path, "run", write_run_config(TINY_QP)) == 3
    assert "non-finite x at iteration 5" in capsys.readouterr().err


def test_traces_are_byte_identical(tmp_path, defaults_path, write_run_config):
    path = write_run_config(TINY_QP)
    assert cli(defaults_path, "--out", str(tmp_path / "a"), "run", path) == 0
    assert cli(defaults_path, "--out", str(tmp_path / "b"), "run", path) == 0
    first = (tmp_path / "a" / "tiny" / "ac-pdhg" / "trace.csv").read_bytes()
    second = (tmp_path / "b" / "tiny" / "ac-pdhg" / "trace.csv").read_bytes()
    assert first == second


def test_output_dir_from_environment(tmp_path, defaults_path, write_run_config, monkeypatch):
    monkeypatch.setenv("ACPD_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli(defaults_path, "run", write_run_config(TINY_QP)) == 0
    assert (tmp_path / "env" / "tiny" / "ac-pdhg" / "trace.csv").exists()


def test_seed_and_iteration_overrides(tmp_path, defaults_path, write_run_config):
    path = write_run_config(TINY_QP)
    args = ["--out", str(tmp_path / "o"), "--seed", "99", "--max-iters", "30", "run", path]
    assert cli(defaults_path, *args) == 0
    certificate = json.loads((tmp_path / "o" / "tiny" / "ac-pdhg" / "certificate.json").read_text())
    assert certificate["provenance"]["problem"]["seed"] == 99
    assert certificate["k"] == 30


def test_guess_check_writes_rounds(tmp_path, defaults_path, write_run_config):
    document = {
        "name": "gc",
        "algorithm": "guess-check-pdhg",
        "problem": {"family": "constrained-qp", "n": 6, "m": 2, "seed": 7},
        "guess_check": {"D_hat0": 1.0, "eps1": 1.0, "eps2": 0.1},
    }
    assert cli(defaults_path, "--out", str(tmp_path), "run", write_run_config(document)) == 0
    run_dir = tmp_path / "gc" / "guess-check-pdhg"
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["D_hat_Y"] >= 1.0
    for i in range(summary["outer_count"]):
        assert (run_dir / f"trace_round{i}.csv").exists()
    assert summary["violation"] <= 0.1


def test_compare_table(tmp_path, defaults_path, write_run_config, capsys):
    document = dict(TINY_QP, name="cmp", algorithms=["ac-pdhg", "ac-apdhg"])
    document["stop"] = {"max_iters": 100}
    path = write_run_config(document)
    assert cli(defaults_path, "--out", str(tmp_path / "c1"), "compare", path) == 0
    assert cli(defaults_path, "--out", str(tmp_path / "c2"), "compare", path) == 0

    table = pd.read_csv(tmp_path / "c1" / "cmp" / "compare.csv")
    assert table["algorithm"].tolist() == ["ac-pdhg", "ac-apdhg"]
    assert table["final_k"].tolist() == [100, 100]
    assert (tmp_path / "c1" / "cmp" / "compare.csv").read_bytes() == (
        tmp_path / "c2" / "cmp" / "compare.csv"
    ).read_bytes()
    assert "ac-apdhg" in capsys.readouterr().out


def test_batch_runs_each_entry(tmp_path, defaults_path, write_run_config):
    document = dict(TINY_QP, batch=[{"problem": {"seed": 1}}, {"problem": {"seed": 2}}])
    assert cli(defaults_path, "--out", str(tmp_path), "run", write_run_config(document)) == 0
    for i in range(2):
        assert (tmp_path / f"tiny_{i}" / "ac-pdhg" / "trace.csv").exists()
