"""
Gaussian temporal anchors
Training anchor sets around an annotated point, the inference grid, and
conversion of anchors to time intervals
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cfmr.exceptions.custom_exceptions import ValidationError
from cfmr.models.domain import AnchorSet, GaussianAnchor

SQRT_2PI = math.sqrt(2.0 * math.pi)
_TINY = np.finfo(np.float64).tiny


def width_floor(l_V: Optional[int]) -> float:
    """Narrowest width that still spans two positions"""
    return 2.0 / l_V if l_V else 0.0


def density(anchor: GaussianAnchor, l_V: int, gamma: float) -> np.ndarray:
    """
    Gaussian density of the anchor at positions i / l_V, i = 1..l_V

    Args:
        anchor: center e and width v (normalized)
        l_V: number of temporal positions
        gamma: scaling hyperparameter; the standard deviation is v / gamma

    Returns:
        Strictly positive vector of length l_V
    """
    if anchor.width <= 0:
        raise ValidationError(f"anchor width must be > 0, got {anchor.width}")
    if gamma <= 0:
        raise ValidationError(f"gamma must be > 0, got {gamma}")
    if l_V < 1:
        raise ValidationError(f"l_V must be >= 1, got {l_V}")

    sigma = anchor.width / gamma
    positions = np.arange(1, l_V + 1, dtype=np.float64) / l_V
    values = np.exp(-((positions - anchor.center) ** 2) / (2.0 * sigma * sigma)) / (SQRT_2PI * sigma)
    # far tails underflow for narrow anchors
    return np.maximum(values, _TINY)


def training_anchor_set(
        point: float,
        v_max: float,
        scales: int,
        l_V: Optional[int] = None,
        min_segment: float = 0.05
) -> AnchorSet:
    """
    Point-guided positives, complement negatives and the whole-video pseudo-anchor

    Positives share the annotated point as center with widths v_max * n / N.
    Each complement of [point - v_max/2, point + v_max/2] no shorter than
    min_segment becomes one negative anchor centered at its midpoint with
    width equal to its length.
    """
    if not 0.0 <= point <= 1.0:
        raise ValidationError(f"point must lie in [0, 1], got {point}")
    if scales < 1:
        raise ValidationError(f"scales must be >= 1, got {scales}")

    floor = width_floor(l_V)
    positives = [
        GaussianAnchor(center=point, width=max(v_max * n / scales, floor), scale=n)
        for n in range(1, scales + 1)
    ]

    negatives = []
    left = point - v_max / 2.0
    if left >= min_segment:
        negatives.append(GaussianAnchor(center=left / 2.0, width=max(left, floor), scale=0))
    right_start = point + v_max / 2.0
    right = 1.0 - right_start
    if right >= min_segment:
        negatives.append(GaussianAnchor(center=right_start + right / 2.0, width=max(right, floor), scale=0))

    return AnchorSet(positives=positives, negatives=negatives, include_whole_video=True)


def inference_anchor_grid(centers: int, v_max: float, scales: int, l_V: Optional[int] = None) -> AnchorSet:
    """centers x scales anchors; center k at (k + 0.5) / centers"""
    if centers < 1 or scales < 1:
        raise ValidationError(f"centers and scales must be >= 1, got {centers}, {scales}")
    floor = width_floor(l_V)
    anchors = [
        GaussianAnchor(center=(k + 0.5) / centers, width=max(v_max * n / scales, floor), scale=n)
        for k in range(centers)
        for n in range(1, scales + 1)
    ]
    return AnchorSet(positives=anchors, negatives=[], include_whole_video=False)


def anchor_to_interval(anchor: GaussianAnchor, duration: float) -> Tuple[float, float]:
    """Clip [e - v/2, e + v/2] to [0, 1] and scale to seconds"""
    if duration <= 0:
        raise ValidationError(f"duration must be > 0, got {duration}")
    start = max(0.0, anchor.center - anchor.width / 2.0)
    end = min(1.0, anchor.center + anchor.width / 2.0)
    return start * duration, end * duration


def weight_matrix(anchors: Sequence[GaussianAnchor], l_V: int, gamma: float,
                  whole_video: bool = False) -> np.ndarray:
    """Stack anchor densities (and an all-ones row for the whole video) into (B, l_V)"""
    rows: List[np.ndarray] = [density(a, l_V, gamma) for a in anchors]
    if whole_video:
        rows.append(np.ones(l_V))
    return np.stack(rows, axis=0)
