#!/usr/bin/env python3
"""
Response envelopes and payloads matching openapi.yaml
"""

from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from flask import g, has_request_context

from cfmr.exceptions.custom_exceptions import CfmrError
from cfmr.models.domain import ConceptIndex, RankedMoment


class StandardResponse:
    """
    {success, data | error, message, meta} envelope shared by every endpoint
    """

    @staticmethod
    def success(data: Any, message: str = "Success", meta: Optional[Dict] = None) -> Dict:
        """
        Args:
            data: Response payload
            message: Human-readable summary
            meta: Response metadata such as the cache flag

        Returns:
            Success envelope
        """
        return {
            'success': True,
            'data': data,
            'message': message,
            'meta': meta
        }

    @staticmethod
    def error(error: str, message: str, meta: Optional[Dict] = None) -> Dict:
        """
        Error envelope; inside a request the meta carries the correlation ID
        so a client can quote it back
        """
        if meta is None and has_request_context() and hasattr(g, 'correlation_id'):
            meta = {'correlation_id': g.correlation_id}
        return {
            'success': False,
            'error': error,
            'message': message,
            'meta': meta
        }

    @staticmethod
    def from_exception(error: CfmrError) -> Dict:
        return StandardResponse.error(error=error.error_code, message=str(error))

    @staticmethod
    def validation_failed(errors: List[str]) -> Dict:
        return StandardResponse.error(
            error='validation_error',
            message='Validation failed: ' + ', '.join(errors)
        )


class MomentsResponse:
    """Ranked moments for one query"""

    @staticmethod
    def create(moments: List[RankedMoment], video_id: Optional[str]) -> Dict:
        return {
            'video_id': video_id,
            'scope': 'video' if video_id else 'corpus',
            'moments': [m.to_dict() for m in moments],
        }


class IndexInfoResponse:
    @staticmethod
    def create(index: ConceptIndex) -> Dict:
        return index.header()


class HealthResponse:
    """
    Service status plus what is being served

    A service that started without a usable model/index pair stays up in
    degraded mode: /health answers, query endpoints return 503.
    """

    @staticmethod
    def create(
            dependencies: Dict[str, str],
            fingerprint: Optional[str] = None,
            videos: int = 0,
            service: str = 'cfmr-moments'
    ) -> Dict:
        """
        Args:
            dependencies: loaded/missing for model and index, connected/disconnected for redis
            fingerprint: hex fingerprint of the served model, None when nothing is served
            videos: number of indexed videos being served
            service: Service name

        Returns:
            Health payload; status is healthy only when model and index are both loaded
        """
        serving = dependencies.get('model') == 'loaded' and dependencies.get('index') == 'loaded'
        return {
            'status': 'healthy' if serving else 'degraded',
            'timestamp': datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z'),
            'service': service,
            'dependencies': dependencies,
            'artifacts': {
                'mode': 'serving' if serving else 'degraded',
                'fingerprint': fingerprint if serving else None,
                'videos': videos if serving else 0,
            },
        }
