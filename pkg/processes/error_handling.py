"""Module for handling errors"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

from mbu_rpa_core.exceptions import BusinessError, ProcessError

from helpers import config
from helpers.exceptions import CheckFailure, GuardExceededError
from helpers.run_functions import write_json

logger = logging.getLogger(__name__)

ERROR_FILE = "error.json"


@dataclass
class ErrorContext:
    """Context for error handling"""

    command: str | None = None
    out_dir: Path | None = None
    action: Callable | None = None


def exit_code_for(error: ProcessError | BusinessError) -> int:
    """CheckFailure -> 1, other BusinessError -> 2, GuardExceededError -> 3, other ProcessError -> 1."""
    if isinstance(error, CheckFailure):
        return config.EXIT_CHECK_FAILED
    if isinstance(error, BusinessError):
        return config.EXIT_CONFIG
    if isinstance(error, GuardExceededError):
        return config.EXIT_GUARD
    return config.EXIT_CHECK_FAILED


def handle_error(
    error: ProcessError | BusinessError,
    log,
    context: ErrorContext | None = None,
) -> int:
    """
    Log the error, persist its details and map it to an exit code.

    Args:
        error (ProcessError | BusinessError): The error to handle.
        log (function): Logging function to log messages.
        context (ErrorContext): Command name, output directory and an optional
            callback receiving the error details.

    Returns:
        int: The process exit code.
    """
    if context is None:
        context = ErrorContext()
    error_info = error.__dictinfo__()
    log_msg = f"Error: {error}"
    if context.command:
        log_msg = f"{repr(error)} raised in command: {context.command}. " + log_msg
    log(log_msg)

    if context.out_dir is not None:
        try:
            write_json(Path(context.out_dir) / ERROR_FILE, {"command": context.command, **error_info})
        except OSError as e:
            logger.warning("Could not write %s: %s", ERROR_FILE, e)
    if context.action:
        context.action(error_info)

    return exit_code_for(error)
