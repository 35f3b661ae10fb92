"""
Logging with correlation IDs
Requests carry X-Correlation-ID; everything else is stamped with the current run id
"""

import logging
import uuid
from datetime import datetime, timezone
from typing import Optional

from flask import Flask, g, has_request_context, request

LOG_FORMAT = '[%(asctime)s] [%(correlation_id)s] %(levelname)s in %(module)s: %(message)s'
PACKAGE_LOGGER = 'cfmr'

_run_id: Optional[str] = None


def new_run_id() -> str:
    """Start a new run (one per CLI invocation or training run)"""
    global _run_id
    _run_id = uuid.uuid4().hex[:12]
    return _run_id


def current_run_id() -> str:
    return _run_id or new_run_id()


class CorrelationIdFilter(logging.Filter):
    """
    Logging filter that adds correlation ID to log records
    """

    def filter(self, record):
        if has_request_context():
            correlation_id = getattr(g, 'correlation_id', None)
            if not correlation_id:
                correlation_id = str(uuid.uuid4())
                g.correlation_id = correlation_id
            record.correlation_id = correlation_id
        else:
            record.correlation_id = current_run_id()
        return True


def _handler() -> logging.Handler:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.addFilter(CorrelationIdFilter())
    return handler


def setup_logging(level: str = 'INFO') -> logging.Logger:
    """
    Configure the package logger for command-line runs

    Args:
        level: logging level name
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.handlers.clear()
    logger.addHandler(_handler())
    logger.setLevel(level.upper())
    logger.propagate = False
    return logger


def setup_app_logging(app: Flask) -> None:
    """
    Configure application logging with correlation IDs

    Args:
        app: Flask application instance
    """
    handler = _handler()
    log_level = logging.DEBUG if app.config['DEBUG'] else app.config.get('CFMR_LOG_LEVEL', 'INFO')

    app.logger.handlers.clear()
    app.logger.addHandler(handler)
    app.logger.setLevel(log_level)

    package_logger = logging.getLogger(PACKAGE_LOGGER)
    package_logger.handlers.clear()
    package_logger.addHandler(handler)
    package_logger.setLevel(log_level)
    package_logger.propagate = False

    app.logger.info(f"CFMR moment API started - debug={app.config['DEBUG']}")

    @app.before_request
    def before_request():
        """Adopt the client's correlation ID or generate one"""
        if not hasattr(g, 'correlation_id'):
            g.correlation_id = request.headers.get('X-Correlation-ID') or str(uuid.uuid4())
        g.request_start_time = datetime.now(timezone.utc)

    @app.after_request
    def after_request(response):
        """Log request completion with duration"""
        if hasattr(g, 'request_start_time'):
            duration = (datetime.now(timezone.utc) - g.request_start_time).total_seconds() * 1000
            app.logger.info(
                f"{request.method} {request.path} - {response.status_code} - {duration:.2f}ms"
            )

        if hasattr(g, 'correlation_id'):
            response.headers['X-Correlation-ID'] = g.correlation_id

        return response
