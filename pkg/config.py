"""
Configuration settings for the Flask application.
Loads environment variables and defines default values.
"""

import logging
import os
from dotenv import load_dotenv
from flask import current_app

# Base directory for the application
BASE_DIR = os.path.abspath(os.path.dirname(__file__))

# Load environment variables from .env file
load_dotenv(os.path.join(BASE_DIR, '.env'))


class Config:
    """Flask application configuration variables."""

    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()
    LOG_FILE = os.environ.get('LOG_FILE')

    # Decoding
    DEFAULT_BEAM_WIDTH = int(os.environ.get('DEFAULT_BEAM_WIDTH', 100))
    DEFAULT_NBEST = int(os.environ.get('DEFAULT_NBEST', 1))
    DECODE_WORKERS = int(os.environ.get('DECODE_WORKERS', 1))

    # Gradient check
    GRADCHECK_TOLERANCE = float(os.environ.get('GRADCHECK_TOLERANCE', 1e-5))

    @classmethod
    def validate(cls, app):
        """
        Validate configuration variables.

        Args:
            app: Flask application instance for logging.

        Raises:
            RuntimeError: If a variable is out of range.
        """
        with app.app_context():
            errors = []
            if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
                errors.append(f"LOG_LEVEL {cls.LOG_LEVEL!r} is not a logging level")
            if cls.DEFAULT_BEAM_WIDTH < 1:
                errors.append("DEFAULT_BEAM_WIDTH must be at least 1")
            if not 1 <= cls.DEFAULT_NBEST <= cls.DEFAULT_BEAM_WIDTH:
                errors.append("DEFAULT_NBEST must lie in [1, DEFAULT_BEAM_WIDTH]")
            if cls.DECODE_WORKERS < 1:
                errors.append("DECODE_WORKERS must be at least 1")
            if not cls.GRADCHECK_TOLERANCE > 0:
                errors.append("GRADCHECK_TOLERANCE must be positive")
            for error in errors:
                current_app.logger.error(f"Configuration error: {error}")
            if errors:
                raise RuntimeError("; ".join(errors))
            current_app.logger.debug("Configuration validated successfully")


class TestingConfig(Config):
    """Configuration for the test suite: no log file, small beams."""
    TESTING = True
    LOG_FILE = None
    LOG_LEVEL = 'WARNING'
    DEFAULT_BEAM_WIDTH = 10
