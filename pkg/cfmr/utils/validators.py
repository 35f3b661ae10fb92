"""
Additional validation utilities
"""

import re
from typing import List

from cfmr.exceptions.custom_exceptions import ValidationError

_VIDEO_ID = re.compile(r'^[A-Za-z0-9][A-Za-z0-9_.\-]{0,127}$')


def is_valid_video_id(video_id: str) -> bool:
    """
    Validate a video id (also used as the feature file stem)

    Args:
        video_id: String to validate

    Returns:
        bool: True if it is 1-128 characters of letters, digits, '_', '.', '-'
    """
    return isinstance(video_id, str) and bool(_VIDEO_ID.match(video_id))


def parse_int_list(text: str, name: str = 'value') -> List[int]:
    """'1,5' -> [1, 5]"""
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ValidationError(f"{name} must be a comma-separated list of integers, got '{text}'")
    if not values:
        raise ValidationError(f"{name} is empty")
    return values


def parse_float_list(text: str, name: str = 'value') -> List[float]:
    """'0.5,0.7' -> [0.5, 0.7]"""
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ValidationError(f"{name} must be a comma-separated list of numbers, got '{text}'")
    if not values:
        raise ValidationError(f"{name} is empty")
    return values
