import json

import pytest
import yaml

from src.utils.config import (
    BETA_MAX,
    load_config,
    load_run_config,
    merge_config,
    validate_config,
)
from src.utils.errors import ConfigError


def test_default_config_loads(defaults_path):
    config = load_config(defaults_path)
    assert config["scheduler"]["alpha"] == 0.5
    assert config["storage"]["output_dir"] == "runs"
    assert validate_config(config)


def test_missing_section(tmp_path):
    path = tmp_path / "partial.yaml"
    path.write_text(yaml.safe_dump({"scheduler": {}}))
    with pytest.raises(ConfigError, match="Missing required configuration section"):
        load_config(str(path))


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("does/not/exist.yaml")


def test_run_config_schema_version(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"schema_version": 2}))
    with pytest.raises(ConfigError, match="schema_version"):
        load_run_config(str(path))
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_run_config(str(path))


def test_merge_is_deep_and_copies():
    base = {"scheduler": {"alpha": 0.5, "zeta": 1.0}, "stop": {"max_iters": 10}}
    merged = merge_config(base, {"scheduler": {"alpha": 0.9}, "extra": [1]})
    assert merged["scheduler"] == {"alpha": 0.9, "zeta": 1.0}
    assert merged["stop"] == {"max_iters": 10}
    assert base["scheduler"]["alpha"] == 0.5


@pytest.mark.parametrize(
    "override,message",
    [
        ({"scheduler": {"alpha": 1.5}}, "alpha out of range"),
        ({"scheduler": {"alpha": 0.0}}, "alpha out of range"),
        ({"scheduler": {"beta": BETA_MAX * 1.01}}, "beta out of range"),
        ({"scheduler": {"mu_d": -1.0}}, "mu_d out of range"),
        ({"stop": {"max_iters": 0}}, "max_iters out of range"),
        ({"trace": {"stride": 0}}, "trace stride out of range"),
        ({"guess_check": {"eps2": 0.0}}, "eps2 out of range"),
    ],
)
def test_validation_messages(defaults_path, override, message):
    config = merge_config(load_config(defaults_path), override)
    with pytest.raises(ConfigError, match=message):
        validate_config(config)


def test_beta_max_value():
    assert BETA_MAX == pytest.approx(0.1835, abs=1e-4)
