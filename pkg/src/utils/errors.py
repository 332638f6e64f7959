"""
Exception hierarchy and error-handling helpers for dqpt-lab.

Every error raised by the engines derives from ``DqptLabError``. The CLI maps
``ConfigError`` (and pydantic validation errors) to exit code 2 and every
``NumericalError`` to exit code 3.
"""
import functools
import logging
from typing import Any, Callable, Dict, Optional

logger = logging.getLogger("dqpt_lab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class DqptLabError(Exception):
    """Base class for all dqpt-lab errors."""


class ConfigError(DqptLabError, ValueError):
    """
    Invalid run configuration.

    Args:
        key: The offending configuration key
        message: Human-readable description
    """

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")

    def __reduce__(self):
        # joblib workers send exceptions back pickled
        return type(self), (self.key, self.message)


class SizeLimit(DqptLabError, ValueError):
    """Requested system size is outside what the engine supports."""


class InvalidState(DqptLabError, ValueError):
    """A density matrix or state vector failed its validity checks."""


class NumericalError(DqptLabError, ArithmeticError):
    """Base class for numerical failures (exit code 3)."""


class DegenerateModeError(NumericalError):
    """The filled and empty quasi-energy pairs of a mode cannot be separated."""


class SingularOverlapError(NumericalError):
    """The overlap block of a quench is numerically singular."""


class NoSolution(NumericalError):
    """A root search found no bracketing interval."""


class GaplessGroundState(NumericalError):
    """A single-particle level sits at zero energy, so the vacuum is not unique."""


class SectorMismatch(NumericalError):
    """ED and momentum-space vacuum energies disagree, so the parity sectors differ."""


class WindowTooShort(NumericalError):
    """A time series ends before the requested averaging window."""


class AmbiguousRegion(NumericalError):
    """A boundary sign pattern matches no anchored phase region."""


class OracleFailure(NumericalError):
    """A cross-engine oracle check exceeded its tolerance."""


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit code.

    Args:
        error: The raised exception

    Returns:
        2 for configuration/validation problems, 3 for numerical failures
    """
    # pydantic's ValidationError subclasses ValueError
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, ValueError):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def numerical_error_handler(
    flag_row: Optional[Callable[..., Dict[str, Any]]] = None
) -> Callable:
    """
    Decorator for sweep workers: numerical failures become flagged rows.

    ``SizeLimit`` and ``ConfigError`` describe the whole run, not one point,
    and propagate unchanged.

    Args:
        flag_row: Builds the replacement row from the worker's arguments;
            defaults to ``{"error": <message>}``

    Returns:
        The decorator
    """

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except (SizeLimit, ConfigError):
                raise
            except (NumericalError, ValueError) as e:
                logger.error(f"Error in {func.__name__}: {e}", exc_info=True)
                row = flag_row(*args, **kwargs) if flag_row else {}
                row["error"] = str(e)
                return row

        return wrapper

    return decorator
