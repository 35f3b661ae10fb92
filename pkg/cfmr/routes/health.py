#!/usr/bin/env python
"""Health check route."""
from flask import Blueprint, current_app, jsonify

from cfmr.models.response_models import HealthResponse

health_bp = Blueprint('health', __name__)


@health_bp.route('/health', methods=['GET'])
def health_check():
    """Dependency status and the served model/index; 200 even when degraded."""
    retriever = getattr(current_app, 'retriever', None)

    redis_status = 'disconnected'
    if getattr(current_app, 'cache_service', None):
        if current_app.cache_service.is_connected():
            redis_status = 'connected'

    health_data = HealthResponse.create(
        dependencies={
            'model': 'loaded' if getattr(current_app, 'model', None) else 'missing',
            'index': 'loaded' if retriever else 'missing',
            'redis': redis_status
        },
        fingerprint=getattr(current_app, 'fingerprint', '') or None,
        videos=len(retriever.index.entries) if retriever else 0,
    )
    return jsonify(health_data), 200
