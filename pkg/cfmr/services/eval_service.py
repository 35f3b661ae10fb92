"""
Evaluation over interval-annotated samples
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from cfmr.exceptions.custom_exceptions import ValidationError
from cfmr.models.domain import ConceptIndex, EvalResult, IntervalSample, RankedMoment
from cfmr.services.index_service import MomentRetriever, non_max_suppression
from cfmr.services.metrics import mean_iou, recall_at
from cfmr.services.model import CFMRModel

logger = logging.getLogger(__name__)


def _truths(samples: Sequence[IntervalSample]):
    return [(s.t_start, s.t_end) for s in samples]


def score_predictions(predictions: Sequence[Sequence[RankedMoment]], samples: Sequence[IntervalSample],
                      topk: Sequence[int], ious: Sequence[float]) -> EvalResult:
    truths = _truths(samples)
    recall = {(k, m): recall_at(predictions, truths, k, m) for k in topk for m in ious}
    result = EvalResult(recall=recall, samples=len(samples), mean_iou=mean_iou(predictions, truths))
    problems = result.check_monotone()
    if problems:
        raise ValidationError('recall table is not monotone: ' + '; '.join(problems))
    return result


def predict(retriever: MomentRetriever, samples: Sequence[IntervalSample], topk: int,
            nms_iou: float) -> List[List[RankedMoment]]:
    return [retriever.query(s.query, topk=topk, nms_iou=nms_iou, video_id=s.video_id) for s in samples]


def evaluate(
        model: CFMRModel,
        index: ConceptIndex,
        samples: Sequence[IntervalSample],
        topk: Sequence[int] = (1, 5),
        ious: Sequence[float] = (0.5, 0.7),
        nms_iou: float = 0.7,
        sim_mode: str = 'rowwise'
) -> EvalResult:
    """R@K, IoU=m for every (K, m) pair plus top-1 mIoU"""
    if not samples:
        raise ValidationError('no evaluation samples')
    retriever = MomentRetriever(model, index, sim_mode)
    predictions = predict(retriever, samples, max(topk), nms_iou)
    return score_predictions(predictions, samples, topk, ious)


def random_baseline(
        index: ConceptIndex,
        samples: Sequence[IntervalSample],
        topk: Sequence[int] = (1, 5),
        ious: Sequence[float] = (0.5, 0.7),
        nms_iou: float = 0.7,
        shuffles: int = 20,
        seed: int = 0
) -> EvalResult:
    """Recall with anchor scores drawn at random, averaged over seeded shuffles"""
    if not samples:
        raise ValidationError('no evaluation samples')
    rng = np.random.default_rng(seed)
    tables: List[EvalResult] = []
    for _ in range(shuffles):
        predictions = []
        for sample in samples:
            entry = index.entry(sample.video_id)
            scores = rng.permutation(len(entry.anchors)) / max(1, len(entry.anchors))
            candidates = [(s, a, entry.video_id, entry.duration) for s, a in zip(scores, entry.anchors)]
            predictions.append(non_max_suppression(candidates, max(topk), nms_iou))
        tables.append(score_predictions(predictions, samples, topk, ious))

    recall = {key: float(np.mean([t.recall[key] for t in tables])) for key in tables[0].recall}
    return EvalResult(recall=recall, samples=len(samples),
                      mean_iou=float(np.mean([t.mean_iou for t in tables])))


def result_frame(results: Dict[str, EvalResult]) -> pd.DataFrame:
    """One row per named result with an R@K,IoU=m column per pair"""
    rows = []
    for name, result in results.items():
        row = {'run': name, 'samples': result.samples, 'mIoU': result.mean_iou}
        row.update({f"R@{k},IoU={m}": v for (k, m), v in sorted(result.recall.items())})
        rows.append(row)
    return pd.DataFrame(rows)


def log_result(name: str, result: EvalResult, baseline: Optional[EvalResult] = None) -> None:
    summary = ', '.join(f"R@{k},IoU={m}={v:.3f}" for (k, m), v in sorted(result.recall.items()))
    logger.info(f"{name}: {summary}, mIoU={result.mean_iou:.3f} over {result.samples} samples")
    if baseline is not None:
        logger.info(f"{name} random baseline: R@1 " + ', '.join(
            f"IoU={m}={v:.3f}" for (k, m), v in sorted(baseline.recall.items()) if k == 1))
