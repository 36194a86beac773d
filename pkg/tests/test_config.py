# tests/test_config.py

import copy
from argparse import Namespace
from pathlib import Path
from unittest.mock import MagicMock

import pytest
import yaml

from dirichlet_wrapper.config import (
    DEFAULT_CONFIG,
    get_standard_directories,
    load_config,
    merge_args_into_config,
    regenerate_default_config,
    validate_config,
)
from dirichlet_wrapper.errors import ConfigError


def test_get_standard_directories(mocker):
    """
    Test that get_standard_directories returns correct paths based on the mocked AppDirs.
    """
    mock_appdirs_instance = MagicMock()
    mock_appdirs_instance.user_config_dir = "/mocked/config/dir"
    mock_appdirs_instance.user_data_dir = "/mocked/data/dir"
    mock_appdirs_instance.user_log_dir = "/mocked/log/dir"
    mocker.patch("dirichlet_wrapper.config.AppDirs", return_value=mock_appdirs_instance)

    directories = get_standard_directories("dirichlet_wrapper")

    assert directories["config_dir"] == Path("/mocked/config/dir")
    assert directories["data_dir"] == Path("/mocked/data/dir")
    assert directories["log_dir"] == Path("/mocked/log/dir")


def test_load_config_creates_default(isolated_dirs, quiet_console):
    """
    Test that a missing config.yaml is created with the default settings.
    """
    config = load_config()

    config_file = isolated_dirs["config_dir"] / "config.yaml"
    assert config_file.exists()
    with config_file.open("r", encoding="utf-8") as f:
        assert yaml.safe_load(f) == DEFAULT_CONFIG
    assert config["wrapper"] == DEFAULT_CONFIG["wrapper"]
    assert config["config_dir"] == isolated_dirs["config_dir"]


def test_load_config_merges_partial_file(isolated_dirs):
    """
    Test that an existing file overrides only the keys it sets.
    """
    config_file = isolated_dirs["config_dir"] / "config.yaml"
    config_file.parent.mkdir(parents=True, exist_ok=True)
    config_file.write_text(yaml.safe_dump({"seed": 11, "wrapper": {"lambda": 0.5}}), encoding="utf-8")

    config = load_config()

    assert config["seed"] == 11
    assert config["wrapper"]["lambda"] == 0.5
    assert config["wrapper"]["samples"] == DEFAULT_CONFIG["wrapper"]["samples"]
    assert config["scoring"] == DEFAULT_CONFIG["scoring"]


def test_load_config_explicit_path(tmp_path):
    """
    Test that --config paths are read but never created.
    """
    explicit = tmp_path / "run.yaml"
    with pytest.raises(ConfigError):
        load_config(explicit_path=str(explicit))
    assert not explicit.exists()

    explicit.write_text("scoring:\n  samples: 7\n", encoding="utf-8")
    assert load_config(explicit_path=str(explicit))["scoring"]["samples"] == 7


@pytest.mark.parametrize("content", ["seed: [1, 2\n", "- just\n- a list\n"])
def test_load_config_rejects_bad_yaml(tmp_path, content):
    """
    Test that unparsable or non-mapping files raise ConfigError.
    """
    explicit = tmp_path / "bad.yaml"
    explicit.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(explicit_path=str(explicit))


def test_merge_args_into_config_subcommand_flags():
    """
    Test that only the flags of the active subcommand are merged, into their sections.
    """
    args = Namespace(
        command="wrap-train",
        lam=0.2,
        samples=5,
        epochs=None,
        lr=None,
        batch=16,
        seed=4,
        out_dir="run",
        yes=False,
        quiet=False,
        verbose=1,
    )
    merged = merge_args_into_config(args, DEFAULT_CONFIG)

    assert merged["wrapper"]["lambda"] == 0.2
    assert merged["wrapper"]["samples"] == 5
    assert merged["wrapper"]["batch_size"] == 16
    assert merged["wrapper"]["epochs"] == DEFAULT_CONFIG["wrapper"]["epochs"]
    assert merged["scoring"]["samples"] == DEFAULT_CONFIG["scoring"]["samples"]
    assert merged["seed"] == 4
    assert merged["output_dir"] == "run"
    assert merged["verbosity"] == 1
    # the defaults themselves are untouched
    assert DEFAULT_CONFIG["wrapper"]["lambda"] == 1e-4


def test_merge_args_into_config_seed_from_environment(monkeypatch):
    """
    Test the seed precedence: --seed, then DW_SEED, then the config.
    """
    monkeypatch.setenv("DW_SEED", "21")
    assert merge_args_into_config(Namespace(command="synth", seed=None), DEFAULT_CONFIG)["seed"] == 21
    assert merge_args_into_config(Namespace(command="synth", seed=2), DEFAULT_CONFIG)["seed"] == 2

    monkeypatch.setenv("DW_SEED", "abc")
    with pytest.raises(ConfigError):
        merge_args_into_config(Namespace(command="synth", seed=None), DEFAULT_CONFIG)


def test_merge_args_into_config_quiet():
    """
    Test that -q maps to verbosity -1.
    """
    merged = merge_args_into_config(Namespace(command="synth", quiet=True, verbose=0), DEFAULT_CONFIG)
    assert merged["verbosity"] == -1


def test_validate_config_defaults():
    """
    Test that the default configuration is valid.
    """
    validate_config(copy.deepcopy(DEFAULT_CONFIG))


@pytest.mark.parametrize(
    "section, key, value",
    [
        ("scenario", "noise_flip_rate", 0.7),
        ("scenario", "n_source", 0),
        ("blackbox", "hidden", [32, -1]),
        ("wrapper", "lambda", -0.1),
        ("wrapper", "samples", 0),
        ("wrapper", "epsilon_clip", 0),
        ("scoring", "table_fractions", [0.1, 1.2]),
        ("remote", "retries", -1),
    ],
)
def test_validate_config_invalid_values(section, key, value):
    """
    Test that invalid section values raise ConfigError.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    config[section][key] = value
    with pytest.raises(ConfigError):
        validate_config(config)


@pytest.mark.parametrize("key", ["rotation", "seed"])
def test_validate_config_unknown_scenario_key(key):
    """
    Test that a scenario key the generator does not take raises ConfigError.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    config["scenario"][key] = 10
    with pytest.raises(ConfigError, match=f"Unknown scenario key.*{key}"):
        validate_config(config)


def test_validate_config_invalid_verbosity():
    """
    Test that an out-of-range verbosity raises ConfigError.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    config["verbosity"] = 5
    with pytest.raises(ConfigError):
        validate_config(config)


def test_regenerate_default_config_auto_confirm(isolated_dirs, quiet_console):
    """
    Test that --yes overwrites an existing config without prompting.
    """
    config_file = isolated_dirs["config_dir"] / "config.yaml"
    config_file.parent.mkdir(parents=True, exist_ok=True)
    config_file.write_text("seed: 99\n", encoding="utf-8")

    assert regenerate_default_config(config={"yes": True})
    with config_file.open("r", encoding="utf-8") as f:
        assert yaml.safe_load(f)["seed"] == DEFAULT_CONFIG["seed"]


def test_regenerate_default_config_cancelled(isolated_dirs, quiet_console, mocker):
    """
    Test that answering 'n' keeps the existing file.
    """
    config_file = isolated_dirs["config_dir"] / "config.yaml"
    config_file.parent.mkdir(parents=True, exist_ok=True)
    config_file.write_text("seed: 99\n", encoding="utf-8")
    prompt = mocker.patch("dirichlet_wrapper.config.Prompt.ask", return_value="n")

    assert not regenerate_default_config(config={})
    prompt.assert_called_once()
    assert config_file.read_text(encoding="utf-8") == "seed: 99\n"
