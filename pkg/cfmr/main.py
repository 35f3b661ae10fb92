#!/usr/bin/env python3
"""Flask application factory."""

import atexit
import os
from pathlib import Path
from typing import Optional

from flask import Flask, jsonify

from cfmr.config import config
from cfmr.exceptions.custom_exceptions import (
    CfmrError, DataFormatError, StaleIndexError, ValidationError,
)
from cfmr.models.domain import ConceptIndex
from cfmr.models.response_models import StandardResponse
from cfmr.routes.health import health_bp
from cfmr.routes.moments import moments_bp
from cfmr.services.cache_service import get_cache_service
from cfmr.services.index_service import MomentRetriever
from cfmr.services.model import CFMRModel, load_model
from cfmr.utils.logger import setup_app_logging
from cfmr.utils.serialization import load_index


def status_for(error: CfmrError) -> int:
    if isinstance(error, StaleIndexError):
        return 409
    if isinstance(error, ValidationError):
        return 400
    if isinstance(error, DataFormatError):
        return 422
    return 500


def _load_artifacts(app: Flask, model: Optional[CFMRModel], index: Optional[ConceptIndex]) -> None:
    app.model, app.retriever, app.fingerprint = None, None, ''
    try:
        if model is None:
            model = load_model(Path(app.config['CFMR_MODEL_PATH']))
        if index is None:
            index = load_index(Path(app.config['CFMR_INDEX_PATH']))
        app.retriever = MomentRetriever(model, index)
        app.model = model
        app.fingerprint = index.fingerprint.hex()
        app.logger.info(
            f"Serving {len(index.entries)} videos, {index.anchor_count} anchors, "
            f"model {app.fingerprint[:12]}"
        )
    except CfmrError as e:
        app.logger.warning(f"Could not load model/index: {str(e)}")
        app.model = model


def create_app(config_name=None, model: Optional[CFMRModel] = None,
               index: Optional[ConceptIndex] = None):
    """Application factory pattern"""
    if config_name is None:
        config_name = os.getenv('FLASK_ENV', 'production')

    app = Flask(__name__)
    app.config.from_object(config[config_name])

    app.register_blueprint(health_bp)
    app.register_blueprint(moments_bp)

    setup_app_logging(app)
    _load_artifacts(app, model, index)

    # Initialize cache service
    app.cache_service = None
    if app.config['REDIS_HOST']:
        with app.app_context():
            try:
                app.cache_service = get_cache_service()
            except Exception as e:
                app.logger.warning(f"Could not connect to Redis: {str(e)}")
                app.cache_service = None
    if app.cache_service is not None:
        atexit.register(app.cache_service.close)

    @app.errorhandler(CfmrError)
    def domain_error(error):
        """Map domain exceptions onto the standard error envelope"""
        status = status_for(error)
        if status == 500:
            app.logger.error(f"{error.error_code}: {str(error)}")
        response = StandardResponse.from_exception(error)
        return jsonify(response), status

    @app.errorhandler(400)
    def bad_request(error):
        response = StandardResponse.error(
            error='bad_request',
            message='The request is malformed or invalid'
        )
        return jsonify(response), 400

    @app.errorhandler(404)
    def not_found(error):
        response = StandardResponse.error(
            error='not_found',
            message='The requested endpoint does not exist'
        )
        return jsonify(response), 404

    @app.errorhandler(405)
    def method_not_allowed(error):
        response = StandardResponse.error(
            error='method_not_allowed',
            message='The HTTP method is not allowed for this endpoint'
        )
        return jsonify(response), 405

    @app.errorhandler(500)
    def internal_error(error):
        response = StandardResponse.error(
            error='internal_error',
            message='An internal server error occurred'
        )
        return jsonify(response), 500

    return app
