"""
Temporal IoU and R@K, IoU=m
"""

from typing import Sequence, Tuple

from cfmr.exceptions.custom_exceptions import InputError, ValidationError
from cfmr.models.domain import RankedMoment

Interval = Tuple[float, float]


def iou(a: Interval, b: Interval) -> float:
    """|a ∩ b| / |a ∪ b|; disjoint or touching intervals give 0"""
    if not a[0] < a[1] or not b[0] < b[1]:
        raise InputError(f"degenerate interval: {a} / {b}")
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0:
        return 0.0
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union


def hit(predictions: Sequence[RankedMoment], truth: Interval, k: int, m: float) -> bool:
    return any(iou((p.t_start, p.t_end), truth) >= m for p in predictions[:k])


def recall_at(predictions: Sequence[Sequence[RankedMoment]], truths: Sequence[Interval],
              k: int, m: float) -> float:
    """
    Fraction of samples whose top-k predictions contain an interval with IoU >= m

    Lists shorter than k contribute whatever they hold.
    """
    if len(predictions) != len(truths):
        raise ValidationError(f"{len(predictions)} prediction lists for {len(truths)} truths")
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    if not truths:
        return 0.0
    hits = sum(hit(p, t, k, m) for p, t in zip(predictions, truths))
    return hits / len(truths)


def mean_iou(predictions: Sequence[Sequence[RankedMoment]], truths: Sequence[Interval]) -> float:
    """Mean IoU of the top-1 prediction (empty lists score 0)"""
    if not truths:
        return 0.0
    total = 0.0
    for preds, truth in zip(predictions, truths):
        if preds:
            total += iou((preds[0].t_start, preds[0].t_end), truth)
    return total / len(truths)
