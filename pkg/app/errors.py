"""
Exception types and logger lookup shared by the transducer modules.
"""

import logging
from typing import Optional

from flask import current_app, has_app_context

LOGGER_NAME = 'transducer'


def get_logger() -> logging.Logger:
    """
    Return the application logger inside an app context, else the module logger.

    Returns:
        logging.Logger: Logger to write diagnostics to.
    """
    if has_app_context():
        return current_app.logger
    return logging.getLogger(LOGGER_NAME)


class TransducerError(Exception):
    """Base exception for transducer errors."""

    default_code = 'TRANSDUCER_ERROR'

    def __init__(self, message: str, code: Optional[str] = None, user_message: Optional[str] = None):
        self.code = code or self.default_code
        self.message = message
        self.user_message = user_message or message
        super().__init__(self.message)


class DimensionError(TransducerError, ValueError):
    """Vector or matrix dimensions do not agree."""
    default_code = 'DIMENSION_MISMATCH'


class LabelRangeError(TransducerError, ValueError):
    """A label index lies outside the alphabet."""
    default_code = 'LABEL_OUT_OF_RANGE'


class MissingCacheError(TransducerError, ValueError):
    """A backward pass was requested without forward activations."""
    default_code = 'MISSING_CACHE'


class ZeroProbabilityError(TransducerError, ArithmeticError):
    """The target sequence has (numerically) zero probability under the model."""
    default_code = 'ZERO_PROBABILITY'

    def __init__(self, message: str, cell: Optional[tuple] = None):
        self.cell = cell
        super().__init__(message)


class DivergenceError(TransducerError, RuntimeError):
    """Training produced a non-finite loss."""
    default_code = 'DIVERGENCE'

    def __init__(self, message: str, sequence_id: Optional[str] = None):
        self.sequence_id = sequence_id
        super().__init__(message)


class DegenerateModelError(TransducerError, RuntimeError):
    """Beam search exceeded the per-step emission cap."""
    default_code = 'DEGENERATE_MODEL'


class OracleGuardError(TransducerError, ValueError):
    """A brute-force enumeration would exceed its size guard."""
    default_code = 'ORACLE_GUARD'


class ConfigError(TransducerError, ValueError):
    """A run configuration file is invalid."""
    default_code = 'CONFIG_INVALID'


class CheckpointError(TransducerError, ValueError):
    """A checkpoint file is unreadable or has an unknown version."""
    default_code = 'CHECKPOINT_INVALID'


class DataFormatError(TransducerError, ValueError):
    """A dataset file is malformed."""
    default_code = 'DATA_MALFORMED'

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ''
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
