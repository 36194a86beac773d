# config.py

"""
Configuration Management

Handles loading, merging, validating, and regenerating configuration settings for the
Dirichlet wrapper toolkit (dw). Settings are grouped by pipeline stage: the synthetic
shift scenario, the simulated black-box, the wrapper, scoring, and the remote client.

Functions:
    - get_standard_directories: Retrieves standard directories based on the operating system.
    - load_config: Loads configuration from a YAML file.
    - merge_args_into_config: Merges CLI arguments into the configuration.
    - validate_config: Validates the configuration values.
    - regenerate_default_config: Regenerates the default configuration file.
"""

import copy
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from appdirs import AppDirs
from loguru import logger
from rich.prompt import Prompt

from dirichlet_wrapper.console_manager import console_proxy
from dirichlet_wrapper.errors import ConfigError
from dirichlet_wrapper.utils import resolve_seed

APP_NAME = "dirichlet_wrapper"

DEFAULT_CONFIG = {
    "seed": 7,
    "verbosity": 0,  # -1: Quiet, 0: Normal, 1: Verbose, 2: Debug
    "output_dir": "dw_output",
    "scenario": {
        "n_source": 2000,
        "n_target": 1000,
        "dim": 16,
        "class_separation": 4.0,
        "shift_rotation_degrees": 35.0,
        "shift_translation": 1.5,
        "noise_flip_rate": 0.05,
    },
    "blackbox": {
        "hidden": [32, 32],
        "epochs": 30,
        "batch_size": 32,
        "lr": 0.01,
    },
    "wrapper": {
        "hidden": [20, 20, 20, 20],
        "epochs": 80,
        "batch_size": 32,
        "lr": 0.001,
        "samples": 20,  # M during training
        "lambda": 0.0001,
        "beta_min": 0.01,
        "epsilon_clip": 1e-6,
    },
    "scoring": {
        "samples": 50,  # M during scoring
        "table_fractions": [0.1, 0.2, 0.3],
    },
    "remote": {
        "timeout": 10.0,
        "batch_size": 64,
        "max_workers": 4,
        "retries": 2,
    },
}

# CLI flag -> (config section, key), per subcommand
_ARG_TO_CONFIG_MAP = {
    "synth": {
        "n_source": ("scenario", "n_source"),
        "n_target": ("scenario", "n_target"),
        "dim": ("scenario", "dim"),
        "separation": ("scenario", "class_separation"),
        "rotation": ("scenario", "shift_rotation_degrees"),
        "translation": ("scenario", "shift_translation"),
        "flip": ("scenario", "noise_flip_rate"),
    },
    "bb-train": {
        "hidden": ("blackbox", "hidden"),
        "epochs": ("blackbox", "epochs"),
        "batch": ("blackbox", "batch_size"),
        "lr": ("blackbox", "lr"),
    },
    "bb-predict": {
        "timeout": ("remote", "timeout"),
    },
    "wrap-train": {
        "epochs": ("wrapper", "epochs"),
        "batch": ("wrapper", "batch_size"),
        "lr": ("wrapper", "lr"),
        "samples": ("wrapper", "samples"),
        "lam": ("wrapper", "lambda"),
    },
    "score": {
        "samples": ("scoring", "samples"),
    },
    "gradcheck": {
        "samples": ("wrapper", "samples"),
    },
}


def get_standard_directories(app_name: str = APP_NAME) -> Dict[str, Path]:
    """
    Retrieve standard directories based on the operating system.

    Args:
        app_name (str): The name of the application.

    Returns:
        Dict[str, Path]: Paths for config_dir, data_dir and log_dir.
    """
    dirs = AppDirs(app_name)
    return {
        "config_dir": Path(dirs.user_config_dir),
        "data_dir": Path(dirs.user_data_dir),
        "log_dir": Path(dirs.user_log_dir),
    }


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _write_default_config(config_path: Path) -> None:
    try:
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with config_path.open("w", encoding="utf-8") as f:
            yaml.safe_dump(DEFAULT_CONFIG, f, sort_keys=False)
    except OSError as e:
        logger.error(f"Failed to write default config file '{config_path}': {e}")
        raise ConfigError(f"Failed to write default config file '{config_path}': {e}") from e


def load_config(
    config_file: str = "config.yaml", explicit_path: Optional[str] = None
) -> Dict[str, Any]:
    """
    Load configuration from a YAML file.

    Without ``explicit_path`` the file lives in the user config directory and is
    created with default settings if it does not exist. An explicit path
    (``--config``) is read but never created.

    Args:
        config_file (str, optional): File name inside the config directory. Defaults to "config.yaml".
        explicit_path (Optional[str], optional): Path given on the command line.

    Returns:
        Dict[str, Any]: Configuration dictionary, with ``config_dir`` and ``log_dir`` added.

    Raises:
        ConfigError: If the file cannot be parsed, is not a mapping, or an explicit path is missing.
    """
    dirs = get_standard_directories()

    if explicit_path is not None:
        config_path = Path(explicit_path)
        if not config_path.exists():
            logger.error(f"Config file '{config_path}' does not exist.")
            raise ConfigError(f"Config file '{config_path}' does not exist.")
    else:
        config_path = dirs["config_dir"] / config_file

    if config_path.exists():
        logger.info(f"Loading existing configuration from '{config_path}'.")
        try:
            with config_path.open("r", encoding="utf-8") as f:
                user_config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            logger.error(f"Error parsing the config file: {e}")
            raise ConfigError(f"Error parsing the config file '{config_path}': {e}") from e
        if not isinstance(user_config, dict):
            raise ConfigError(f"Config file '{config_path}' must contain a mapping.")
        config = _deep_merge(DEFAULT_CONFIG, user_config)
        logger.info("Configuration loaded successfully.")
    else:
        _write_default_config(config_path)
        console_proxy.console.print(
            f"[bold green]Default configuration file created at '{config_path}'. Please review and modify it as needed.[/bold green]"
        )
        logger.info(f"Default configuration file created at '{config_path}'.")
        config = copy.deepcopy(DEFAULT_CONFIG)

    # Directory paths are runtime information and never written back to YAML
    config["config_dir"] = dirs["config_dir"]
    config["log_dir"] = dirs["log_dir"]
    return config


def regenerate_default_config(
    config_file: str = "config.yaml", config: Optional[Dict[str, Any]] = None
) -> bool:
    """
    Regenerate the config.yaml file with default settings after user confirmation.

    Args:
        config_file (str, optional): Name of the config file. Defaults to "config.yaml".
        config (Dict, optional): Configuration dictionary. Used to check for auto-confirmation.

    Returns:
        bool: True if the file was written, False if the user cancelled.
    """
    config_path = get_standard_directories()["config_dir"] / config_file

    if config_path.exists():
        if config and config.get("yes", False):
            confirmation = "y"
            logger.debug("Auto-confirmation enabled. Proceeding without prompt.")
        else:
            confirmation = Prompt.ask(
                f"[bold yellow]Are you sure you want to regenerate the default '{config_path}'? This will overwrite your current configuration.[/bold yellow]",
                choices=["y", "n"],
                default="n",
            )
        if confirmation.lower() not in ["y", "yes"]:
            console_proxy.console.print(
                "[bold green]Configuration regeneration canceled.[/bold green]"
            )
            logger.info("Configuration regeneration canceled by the user.")
            return False

    _write_default_config(config_path)
    console_proxy.console.print(
        f"[bold green]Default configuration file regenerated at '{config_path}'.[/bold green]"
    )
    logger.info(f"Default configuration file regenerated at '{config_path}'.")
    return True


def merge_args_into_config(args, config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge command-line arguments into the configuration dictionary, giving precedence to CLI arguments.

    Args:
        args: Parsed command-line arguments.
        config (Dict[str, Any]): Configuration dictionary.

    Returns:
        Dict[str, Any]: Updated configuration dictionary with CLI arguments merged in.
    """
    merged = copy.deepcopy(config)
    command = getattr(args, "command", None)

    for arg_name, (section, key) in _ARG_TO_CONFIG_MAP.get(command, {}).items():
        arg_value = getattr(args, arg_name, None)
        if arg_value is not None:
            merged.setdefault(section, {})[key] = arg_value

    if getattr(args, "out_dir", None):
        merged["output_dir"] = args.out_dir
    if getattr(args, "yes", False):
        merged["yes"] = True

    merged["seed"] = resolve_seed(getattr(args, "seed", None), merged.get("seed"))

    # Handle verbosity and quiet flags from CLI
    if getattr(args, "quiet", False):
        merged["verbosity"] = -1
    elif getattr(args, "verbose", 0):
        merged["verbosity"] = min(args.verbose, 2)

    return merged


def _fail(message: str) -> None:
    logger.error(message)
    raise ConfigError(message)


def _check_positive_int(section: Dict[str, Any], key: str, where: str) -> None:
    value = section.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        _fail(f"Invalid {where}.{key} in configuration: {value!r} (must be a positive integer).")


def _check_positive_number(section: Dict[str, Any], key: str, where: str) -> None:
    value = section.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        _fail(f"Invalid {where}.{key} in configuration: {value!r} (must be > 0).")


def validate_config(config: Dict[str, Any]) -> None:
    """
    Validate configuration values.

    Args:
        config (Dict[str, Any]): Configuration dictionary.

    Raises:
        ConfigError: If any validation fails.
    """
    if not isinstance(config.get("seed"), int):
        _fail(f"Invalid seed in configuration: {config.get('seed')!r}.")

    verbosity = config.get("verbosity", 0)
    if verbosity != -1 and (not isinstance(verbosity, int) or not 0 <= verbosity <= 2):
        _fail(
            "Invalid verbosity level in configuration. Must be 0 (Normal), 1 (Verbose), or 2 (Debug). Use -q for Quiet Mode."
        )

    scenario = config["scenario"]
    unknown = sorted(set(scenario) - set(DEFAULT_CONFIG["scenario"]))
    if unknown:
        _fail(f"Unknown scenario key(s) in configuration: {', '.join(map(str, unknown))}.")
    for key in ("n_source", "n_target", "dim"):
        _check_positive_int(scenario, key, "scenario")
    for key in ("class_separation", "shift_rotation_degrees", "shift_translation"):
        value = scenario.get(key)
        if not isinstance(value, (int, float)) or value < 0:
            _fail(f"Invalid scenario.{key} in configuration: {value!r} (must be >= 0).")
    flip = scenario.get("noise_flip_rate")
    if not isinstance(flip, (int, float)) or not 0 <= flip <= 0.5:
        _fail(f"Invalid scenario.noise_flip_rate in configuration: {flip!r} (must be in [0, 0.5]).")

    blackbox = config["blackbox"]
    if not isinstance(blackbox.get("hidden"), list) or not all(
        isinstance(h, int) and h > 0 for h in blackbox["hidden"]
    ):
        _fail(f"Invalid blackbox.hidden in configuration: {blackbox.get('hidden')!r}.")
    _check_positive_int(blackbox, "batch_size", "blackbox")
    _check_positive_number(blackbox, "lr", "blackbox")
    if not isinstance(blackbox.get("epochs"), int) or blackbox["epochs"] < 0:
        _fail(f"Invalid blackbox.epochs in configuration: {blackbox.get('epochs')!r}.")

    wrapper = config["wrapper"]
    if not isinstance(wrapper.get("hidden"), list) or not all(
        isinstance(h, int) and h > 0 for h in wrapper["hidden"]
    ):
        _fail(f"Invalid wrapper.hidden in configuration: {wrapper.get('hidden')!r}.")
    if not isinstance(wrapper.get("epochs"), int) or wrapper["epochs"] < 0:
        _fail(f"Invalid wrapper.epochs in configuration: {wrapper.get('epochs')!r}.")
    for key in ("batch_size", "samples"):
        _check_positive_int(wrapper, key, "wrapper")
    for key in ("lr", "beta_min", "epsilon_clip"):
        _check_positive_number(wrapper, key, "wrapper")
    if not isinstance(wrapper.get("lambda"), (int, float)) or wrapper["lambda"] < 0:
        _fail(f"Invalid wrapper.lambda in configuration: {wrapper.get('lambda')!r} (must be >= 0).")

    scoring = config["scoring"]
    _check_positive_int(scoring, "samples", "scoring")
    fractions = scoring.get("table_fractions")
    if not isinstance(fractions, list) or not all(
        isinstance(f, (int, float)) and 0 <= f <= 1 for f in fractions
    ):
        _fail(f"Invalid scoring.table_fractions in configuration: {fractions!r}.")

    remote = config["remote"]
    _check_positive_number(remote, "timeout", "remote")
    for key in ("batch_size", "max_workers"):
        _check_positive_int(remote, key, "remote")
    if not isinstance(remote.get("retries"), int) or remote["retries"] < 0:
        _fail(f"Invalid remote.retries in configuration: {remote.get('retries')!r}.")
