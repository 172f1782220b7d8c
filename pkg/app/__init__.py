import logging

from flask import Flask
from config import Config


def create_app(config_class=Config):
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Logging geht nach stderr, stdout bleibt den Artefakten vorbehalten
    logging.basicConfig(level=app.config['LOG_LEVEL'])

    # Befehle registrieren
    from app.commands import main
    app.register_blueprint(main)

    return app
