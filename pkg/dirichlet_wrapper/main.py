# main.py

"""
Dirichlet Wrapper (dw) Main Module

Entry point of the dw tool. Parses arguments, sets up the console and logging
for the requested verbosity, loads and validates the configuration, and runs
the selected subcommand.

Functions:
    - main: Runs one dw invocation and returns its exit code.
    - cli: Entry point for the console script.
"""

import sys
from typing import List, Optional

from loguru import logger
from rich.console import Console

from dirichlet_wrapper.cli import parse_arguments
from dirichlet_wrapper.commands import run_command
from dirichlet_wrapper.config import (
    DEFAULT_CONFIG,
    get_standard_directories,
    load_config,
    merge_args_into_config,
    regenerate_default_config,
    validate_config,
)
from dirichlet_wrapper.console_manager import NullConsole, console_proxy
from dirichlet_wrapper.errors import DirichletWrapperError
from dirichlet_wrapper.logger import levels_for_verbosity, setup_logging


def _verbosity(args) -> int:
    if args.quiet:
        return -1
    return min(args.verbose, 2)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Runs the dw tool once.

    Args:
        argv (Optional[List[str]], optional): Command-line arguments. Defaults to ``sys.argv[1:]``.

    Returns:
        int: 0 on success, 1 on a runtime failure (or a failed gradient check).

    Raises:
        SystemExit: With code 2 on invalid arguments, or 0 after ``--help``/``--version``.

    Example:
        >>> main(["--out-dir", "run", "synth"])
        0
    """
    # 1. Parse command-line arguments
    args = parse_arguments(argv)

    # 2. Console and log levels follow -q/-v
    verbosity = _verbosity(args)
    log_level_file, log_level_console = levels_for_verbosity(verbosity)
    console_proxy.set_console(NullConsole() if verbosity == -1 else Console())
    setup_logging(
        log_folder=str(get_standard_directories()["log_dir"]),
        log_level_file=log_level_file,
        log_level_console=log_level_console,
    )
    logger.info("Logging has been configured successfully.")

    try:
        # 3. Configuration regeneration needs no command
        if args.regen_config:
            regenerate_default_config(config=merge_args_into_config(args, DEFAULT_CONFIG))
            return 0

        # 4. Load, merge and validate the configuration
        config = load_config(explicit_path=args.config)
        config = merge_args_into_config(args, config)
        validate_config(config)

        # 5. Run the subcommand
        return run_command(args, config)
    except DirichletWrapperError as e:
        logger.error(f"{type(e).__name__}: {e}")
        console_proxy.console.print(f"[bold red]Error: {e}[/bold red]")
        return 1


def cli():
    """
    Entry point for the console script.

    Exits with the code returned by :func:`main`, or 130 when interrupted.
    """
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("dw interrupted by user.")
        console_proxy.console.print("\n[bold red]Interrupted by user.[/bold red]")
        sys.exit(130)


if __name__ == "__main__":
    cli()
