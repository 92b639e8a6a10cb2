import logging

from app.core.exceptions import InternalError, RgError, UserError

logger = logging.getLogger(__name__)


def user_error_handler(exc: UserError) -> tuple[str, int]:
    """
    Handler for errors caused by the input: bad syntax, unknown names, bad files.

    Args:
        exc (UserError): The error raised while running a command.

    Returns:
        tuple[str, int]: The `error:` line to print and the exit code (1).
    """
    logger.warning(f"⚠️ {type(exc).__name__}: {exc}")
    return f"error: {exc}", exc.exit_code


def internal_error_handler(exc: InternalError) -> tuple[str, int]:
    """
    Handler for broken engine invariants (dangling references, impossible plans).

    Args:
        exc (InternalError): The invariant breach.

    Returns:
        tuple[str, int]: The `error: internal:` line and the exit code (2).
    """
    logger.exception(f"💥 Invariant breach: {exc}")
    return f"error: internal: {exc}", exc.exit_code


def generic_exception_handler(exc: Exception) -> tuple[str, int]:
    """
    Generic handler for anything the engine did not anticipate.

    Args:
        exc (Exception): The unexpected exception.

    Returns:
        tuple[str, int]: A generic internal error line and exit code 2.
    """
    logger.exception(f"❌ Unhandled exception: {exc}")
    return f"error: internal: {type(exc).__name__}: {exc}", 2


def handle_exception(exc: Exception) -> tuple[str, int]:
    if isinstance(exc, UserError):
        return user_error_handler(exc)
    if isinstance(exc, InternalError):
        return internal_error_handler(exc)
    if isinstance(exc, RgError):
        return user_error_handler(exc)
    return generic_exception_handler(exc)
