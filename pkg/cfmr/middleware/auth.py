"""
X-API-Key check for the query endpoint (openapi.yaml securitySchemes)
"""

import hmac
from functools import wraps
from typing import Iterable

from flask import current_app, jsonify, request

from cfmr.models.response_models import StandardResponse


def _masked(key: str) -> str:
    return f"{key[:2]}***" if len(key) > 4 else '***'


def key_matches(candidate: str, configured: Iterable[str]) -> bool:
    """Constant-time comparison against every configured key"""
    encoded = candidate.encode('utf-8')
    matched = False
    for key in configured:
        matched |= hmac.compare_digest(encoded, key.encode('utf-8'))
    return matched


def require_api_key(f):
    """
    Require X-API-Key when API_KEYS is configured

    With no keys configured the endpoint is open (local and desk deployments).
    """

    @wraps(f)
    def decorated_function(*args, **kwargs):
        configured = current_app.config.get('API_KEYS', [])
        if not configured:
            return f(*args, **kwargs)

        api_key = request.headers.get('X-API-Key')
        if not api_key:
            current_app.logger.warning(f"Rejected {request.path}: no API key")
            response = StandardResponse.error(
                error='missing_api_key',
                message='API key is required. Please provide X-API-Key header.'
            )
            return jsonify(response), 401

        if not key_matches(api_key, configured):
            current_app.logger.warning(f"Rejected {request.path}: unknown API key {_masked(api_key)}")
            response = StandardResponse.error(
                error='invalid_api_key',
                message='Invalid API key provided'
            )
            return jsonify(response), 401

        return f(*args, **kwargs)

    return decorated_function
