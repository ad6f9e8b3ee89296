"""Shared fixtures for the solver test-suite."""

import json
from pathlib import Path

import numpy as np
import pytest

from src.problems.generators import gen_box_bilinear, gen_two_block, generate
from src.problems.models import ProblemSpec
from src.solvers.scheduler import SchedulerConfig

REPO_ROOT = Path(__file__).resolve().parents[1]
DEFAULTS = REPO_ROOT / "config" / "default.yaml"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def defaults_path():
    return str(DEFAULTS)


@pytest.fixture
def qp_instance():
    """Small equality-constrained QP over a box with a planted interior solution."""
    return generate(ProblemSpec("constrained-qp", n=6, m=2, seed=7))


@pytest.fixture
def bilinear_instance():
    return gen_box_bilinear(4, 3, seed=5)


@pytest.fixture
def two_block():
    problem, truth = gen_two_block(5, 3, 3, seed=11)
    return problem, truth


@pytest.fixture
def sched():
    return SchedulerConfig(mu_d=0.05)


@pytest.fixture
def write_run_config(tmp_path):
    """Write a run config document and return its path."""

    def _write(document, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(dict({"schema_version": 1}, **document)))
        return str(path)

    return _write
