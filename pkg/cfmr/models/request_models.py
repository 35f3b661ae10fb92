#!/usr/bin/env python3
"""Request validation models matching openapi.yaml."""
from typing import Any, Dict, List, Optional

from cfmr.utils.validators import is_valid_video_id

MAX_TOPK = 100


class QueryRequest:
    """Moment query request model."""
    OPTIONAL_FIELDS = ['video_id', 'text', 'tokens', 'topk', 'nms']

    @staticmethod
    def validate(data: Dict[str, Any]) -> Optional[List[str]]:
        """Validate moment query request data."""
        errors = []

        if not data or not isinstance(data, dict):
            return ['Request body is required']

        unknown = sorted(set(data) - set(QueryRequest.OPTIONAL_FIELDS))
        if unknown:
            errors.append(f"unknown fields: {', '.join(unknown)}")

        has_text = 'text' in data
        has_tokens = 'tokens' in data
        if has_text == has_tokens:
            errors.append("exactly one of 'text' or 'tokens' is required")

        if has_text and (not isinstance(data['text'], str) or not data['text'].strip()):
            errors.append('text must be a non-empty string')

        if has_tokens:
            tokens = data['tokens']
            if (not isinstance(tokens, list) or not tokens
                    or not all(isinstance(t, int) and not isinstance(t, bool) and t >= 0 for t in tokens)):
                errors.append('tokens must be a non-empty list of non-negative integers')

        if 'video_id' in data and not is_valid_video_id(data['video_id']):
            errors.append('video_id must be 1-128 characters of letters, digits, _ . -')

        if 'topk' in data:
            topk = data['topk']
            if not isinstance(topk, int) or isinstance(topk, bool) or not 1 <= topk <= MAX_TOPK:
                errors.append(f"topk must be an integer between 1 and {MAX_TOPK}")

        if 'nms' in data:
            nms = data['nms']
            if not isinstance(nms, (int, float)) or isinstance(nms, bool) or not 0 < nms <= 1:
                errors.append('nms must be a number in (0, 1]')

        return errors if errors else None
