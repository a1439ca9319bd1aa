"""
Initialize the Flask application that hosts the transducer command-line tools.
"""

import logging

from flask import Flask

from config import Config


def create_app(config_class=Config):
    """
    Create and configure a Flask application instance.

    Args:
        config_class: The configuration class to use (defaults to Config).

    Returns:
        Flask: Configured Flask application instance with the CLI commands registered.
    """
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Validate configuration
    config_class.validate(app)

    # Logging
    app.logger.setLevel(getattr(logging, app.config['LOG_LEVEL']))
    if app.config.get('LOG_FILE') and not app.testing:
        file_handler = logging.FileHandler(app.config['LOG_FILE'])
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        file_handler.setLevel(app.logger.level)
        app.logger.addHandler(file_handler)

    # Register blueprints
    from app.commands import bp as commands_bp
    app.register_blueprint(commands_bp)

    return app
