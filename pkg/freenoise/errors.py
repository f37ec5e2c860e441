"""Exceptions raised by the freenoise package.

Each class also derives from the builtin exception that numpy or
scikit-learn would raise in the same situation, so that generic
``except ValueError`` clauses keep working.
"""


class FreeNoiseError(Exception):
    """Base class of all freenoise errors."""


class ConfigError(FreeNoiseError, ValueError):
    """Invalid configuration value or violated invariant."""

    def __init__(self, message, key=None):
        if key is not None:
            message = "%s: %s" % (key, message)
        super().__init__(message)
        self.key = key


class InputError(FreeNoiseError, ValueError):
    """Invalid user input, such as an empty prompt."""


class ShapeError(FreeNoiseError, ValueError):
    """Array shapes or frame counts do not match."""


class NumericError(FreeNoiseError, FloatingPointError):
    """NaN found in a numeric input."""


class OrderError(FreeNoiseError, ValueError):
    """Timesteps given in the wrong order."""


class FormatError(FreeNoiseError, ValueError):
    """Malformed container or weight file."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = "%s (byte offset %d)" % (message, offset)
        super().__init__(message)
        self.offset = offset


class ModelError(FreeNoiseError, RuntimeError):
    """The network produced a non-finite output."""


class BenchError(FreeNoiseError, RuntimeError):
    """Measured durations are below the timer resolution."""
