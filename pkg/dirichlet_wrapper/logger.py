# logger.py

"""
Logging Configuration

Sets up logging for the Dirichlet wrapper toolkit using Loguru. Every pipeline
stage logs to a rotating file under the log directory and to the console at a
level chosen by the verbosity flags. The logger is configured once per process.

Functions:
    - setup_logging: Configures logging settings with log rotation and appropriate sinks.
    - levels_for_verbosity: Maps the verbosity setting to file and console log levels.
    - reset_logging: Removes all sinks so logging can be configured again.
"""

from datetime import datetime
from pathlib import Path
import sys
from typing import Tuple

from loguru import logger

# Define a module-level flag to implement the Singleton pattern
_logger_initialized = False


def levels_for_verbosity(verbosity: int) -> Tuple[str, str]:
    """
    Maps a verbosity value to (file level, console level).

    Args:
        verbosity (int): -1 quiet, 0 normal, 1 verbose, 2 or more debug.

    Returns:
        Tuple[str, str]: Log levels for the file sink and the console sink.
    """
    if verbosity == -1:
        return "ERROR", "ERROR"
    if verbosity == 1:
        return "INFO", "INFO"
    if verbosity >= 2:
        return "DEBUG", "DEBUG"
    return "INFO", "WARNING"


def setup_logging(
    log_folder: str,
    log_level_file: str = "INFO",
    log_level_console: str = "WARNING",
    rotation: str = "5 MB",
    retention: int = 5,  # Number of backup log files to keep
) -> None:
    """
    Configures the logging settings with log rotation and appropriate sinks.

    Args:
        log_folder (str): The directory where log files will be stored.
        log_level_file (str, optional): Logging level for the file sink. Defaults to "INFO".
        log_level_console (str, optional): Logging level for the console sink. Defaults to "WARNING".
        rotation (str, optional): Log rotation criteria. Defaults to "5 MB".
        retention (int, optional): Number of backup log files to keep. Defaults to 5.

    Raises:
        OSError: If the log directory cannot be created due to permission issues or other OS-related errors.
    """
    global _logger_initialized

    if _logger_initialized:
        # Prevent re-initializing the logger
        return

    try:
        log_dir = Path(log_folder)
        log_dir.mkdir(parents=True, exist_ok=True)

        timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
        log_file = log_dir / f"dw_{timestamp}.log"

        # Remove any default Loguru sinks to prevent duplicate logs
        logger.remove()

        logger.add(
            log_file,
            level=log_level_file,
            rotation=rotation,
            retention=retention,
            encoding="utf-8",
            enqueue=True,  # Ensures thread-safe logging
            serialize=False,
        )

        logger.add(
            sys.stdout,
            level=log_level_console,
            format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
            "<level>{level: <8}</level> | "
            "{message}",
            colorize=True,
            enqueue=True,
        )

        logger.debug("Logging has been configured successfully.")

        _logger_initialized = True

    except OSError as e:
        print(f"Failed to create log directory '{log_folder}': {e}", file=sys.stderr)
        raise


def reset_logging() -> None:
    """Removes every sink and allows :func:`setup_logging` to run again."""
    global _logger_initialized
    logger.remove()
    _logger_initialized = False
