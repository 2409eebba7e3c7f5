"""Centralized exception hierarchy and handler for the localization toolkit.

Every service raises exceptions from this hierarchy rather than bare ValueError
or RuntimeError. The command line maps each class to a process exit code.

Exception Hierarchy:
    AppException (base, exit 2)
    ├── ValidationError (1)
    │   └── ConfigurationError (1)
    ├── NotFoundError (2)
    ├── SignalAbsentError (2)
    ├── NumericalError (2)
    ├── AmbiguityError (2)
    └── NonConvergenceError (3)

Usage in Services:
    from app.core.exceptions import ValidationError

    def true_path_difference_3d(theta: float, psi: float, b: float) -> float:
        if b <= 0:
            raise ValidationError(f"Baseline must be positive, got {b}")
        ...

Usage in Commands:
    try:
        return command(args)
    except AppException as exc:
        return handle_app_exception(exc)
"""

import logging

logger = logging.getLogger(__name__)


class ExitCode:
    """Process exit codes of the command line."""

    SUCCESS = 0
    VALIDATION = 1
    RUNTIME = 2
    NON_CONVERGENCE = 3


class AppException(Exception):
    """
    Base exception class for all application errors.

    Attributes:
        exit_code: Process exit code for this error type
        detail: User-facing error message
        error_code: Machine-readable error code (optional)
    """

    exit_code: int = ExitCode.RUNTIME
    detail: str = "Internal error"
    error_code: str | None = None

    def __init__(
        self,
        detail: str | None = None,
        *,
        error_code: str | None = None,
    ) -> None:
        """
        Initialize the exception.

        Args:
            detail: Custom error message (overrides class default)
            error_code: Machine-readable error identifier
        """
        self.detail = detail or self.__class__.detail
        self.error_code = error_code or self.__class__.error_code
        super().__init__(self.detail)


class ValidationError(AppException):
    """
    Raised when an input violates a domain precondition.

    Used for out-of-range angles, non-positive lengths, malformed config
    documents and mismatched array lengths.
    """

    exit_code = ExitCode.VALIDATION
    detail = "Validation error"
    error_code = "VALIDATION_ERROR"


class ConfigurationError(ValidationError):
    """
    Raised when a run cannot proceed with the configuration it was given.

    The typical case is a missing calibration curve when the low-elevation
    branch fires.
    """

    detail = "Configuration error"
    error_code = "CONFIGURATION_ERROR"


class NotFoundError(AppException):
    """Raised when an input artifact (series, curve, audio file) does not exist."""

    detail = "Artifact not found"
    error_code = "NOT_FOUND"


class SignalAbsentError(AppException):
    """
    Raised when the microphones carry no usable signal.

    Distinguishes "no source" from a source straight overhead: both produce a
    vanishing path difference but only the latter has received energy.
    """

    detail = "No source: received signal energy below floor"
    error_code = "SIGNAL_ABSENT"


class NumericalError(AppException):
    """Raised when a computation produces non-finite values, e.g. a diverging filter."""

    detail = "Non-finite value encountered"
    error_code = "NUMERICAL_ERROR"


class AmbiguityError(AppException):
    """Raised when a calibration curve cannot be inverted uniquely."""

    detail = "Calibration curve is not monotone"
    error_code = "AMBIGUITY_ERROR"


class NonConvergenceError(AppException):
    """
    Raised when the orientation estimate is too unsteady to continue.

    The distance phase refuses to start on a non-converged orientation.
    """

    exit_code = ExitCode.NON_CONVERGENCE
    detail = "Orientation estimate did not converge"
    error_code = "NON_CONVERGENCE"


def handle_app_exception(exc: AppException) -> int:
    """
    Log an application exception and return its process exit code.

    Args:
        exc: The exception instance

    Returns:
        Exit code for the command line

    Logging:
        - Validation and configuration errors: message only, warning level
        - Runtime errors: full stack trace, error level
    """
    if exc.exit_code == ExitCode.VALIDATION:
        logger.warning(
            f"{exc.__class__.__name__}: {exc.detail}",
            extra={"exit_code": exc.exit_code, "error_code": exc.error_code},
        )
    else:
        logger.error(
            f"{exc.__class__.__name__}: {exc.detail}",
            exc_info=exc,
            extra={"exit_code": exc.exit_code, "error_code": exc.error_code},
        )
    return exc.exit_code
