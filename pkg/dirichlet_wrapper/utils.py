# utils.py

"""
Utility Functions

Provides small helpers used across the Dirichlet wrapper toolkit: stable string
hashing, seed resolution, output directory handling and argmax conventions.

Functions:
    - fnv1a_64: 64-bit FNV-1a hash of a string.
    - resolve_seed: Picks the seed from the CLI flag, the DW_SEED variable or the config.
    - create_output_directory: Creates (if needed) and returns an output directory.
    - argmax_lowest: Argmax along the last axis with ties broken by lowest index.
"""

import os
from pathlib import Path
from typing import Optional, Union

import numpy as np
from loguru import logger

from dirichlet_wrapper.errors import ConfigError

FNV_OFFSET_BASIS_64 = 0xCBF29CE484222325
FNV_PRIME_64 = 0x100000001B3
_MASK_64 = 0xFFFFFFFFFFFFFFFF

SEED_ENV_VAR = "DW_SEED"


def fnv1a_64(text: str) -> int:
    """
    Computes the 64-bit FNV-1a hash of the UTF-8 encoding of ``text``.

    Args:
        text (str): Text to hash.

    Returns:
        int: Hash value in [0, 2**64).

    Example:
        >>> fnv1a_64("")
        14695981039346656037
    """
    value = FNV_OFFSET_BASIS_64
    for byte in text.encode("utf-8"):
        value ^= byte
        value = (value * FNV_PRIME_64) & _MASK_64
    return value


def resolve_seed(cli_seed: Optional[int], config_seed: Optional[int] = None) -> int:
    """
    Resolves the effective seed: CLI flag first, then DW_SEED, then the config value.

    Args:
        cli_seed (Optional[int]): Value of ``--seed`` or None when not given.
        config_seed (Optional[int], optional): Seed from the configuration file.

    Returns:
        int: The seed to use.

    Raises:
        ConfigError: If DW_SEED is set but is not an integer.
    """
    if cli_seed is not None:
        return int(cli_seed)
    env_value = os.environ.get(SEED_ENV_VAR)
    if env_value not in (None, ""):
        try:
            seed = int(env_value)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{env_value}'") from e
        logger.debug(f"Seed {seed} taken from {SEED_ENV_VAR}.")
        return seed
    return int(config_seed or 0)


def create_output_directory(path: Union[str, Path]) -> Path:
    """
    Creates the output directory if it does not exist and returns it.

    Args:
        path (Union[str, Path]): Directory to create.

    Returns:
        Path: The directory path.

    Raises:
        ConfigError: If the directory cannot be created.
    """
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Failed to create output directory '{directory}': {e}")
        raise ConfigError(f"Failed to create output directory '{directory}': {e}") from e
    return directory


def argmax_lowest(values: np.ndarray) -> np.ndarray:
    """Argmax over the last axis; numpy already returns the first (lowest) index on ties."""
    return np.argmax(np.asarray(values), axis=-1)
