"""
Offline concept index and online moment ranking

The offline half runs the video encoder once per (video, grid anchor); the
online half encodes only the query and compares concept sets, so no video
features are touched at query time.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cfmr.exceptions.custom_exceptions import InputError, StaleIndexError, ValidationError
from cfmr.kernel.tensor import no_grad
from cfmr.models.domain import (
    ConceptIndex, FeatureSequence, GaussianAnchor, IndexEntry, QueryTokens, RankedMoment,
)
from cfmr.services.anchors import anchor_to_interval, inference_anchor_grid, weight_matrix
from cfmr.services.losses import concept_similarity
from cfmr.services.metrics import iou
from cfmr.services.model import CFMRModel

logger = logging.getLogger(__name__)

# (score, anchor, video_id, duration)
Candidate = Tuple[float, GaussianAnchor, str, float]


def index_grid(model: CFMRModel, centers: int, scales: int, v_max: float) -> List[GaussianAnchor]:
    """Grid shared by every video; the width floor follows the model's l_V"""
    return inference_anchor_grid(centers, v_max, scales, l_V=model.cfg.l_V).positives


def encode_entry(model: CFMRModel, video: FeatureSequence, anchors: Sequence[GaussianAnchor],
                 gamma: float) -> IndexEntry:
    if video.dim != model.cfg.d_v:
        raise InputError(
            f"video {video.video_id} has feature dim {video.dim}, model expects {model.cfg.d_v}"
        )
    weights = weight_matrix(anchors, video.length, gamma)
    with no_grad():
        concepts = model.video(video.features, weights).data
    return IndexEntry(video_id=video.video_id, duration=video.duration, anchors=list(anchors),
                      concepts=concepts.astype(np.float32))


def build_index(
        videos: Sequence[FeatureSequence],
        model: CFMRModel,
        centers: int,
        scales: int,
        v_max: float,
        gamma: float,
        workers: int = 4
) -> ConceptIndex:
    """
    Encode every video under every grid anchor

    Videos are encoded in parallel with read-only parameters; entries keep the
    input order so identical inputs give an identical index.
    """
    anchors = index_grid(model, centers, scales, v_max)
    index = ConceptIndex(d_h=model.cfg.d_h, l_C=model.cfg.l_C, centers=centers, scales=scales,
                         v_max=v_max, gamma=gamma, fingerprint=model.fingerprint())
    if not videos:
        return index

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        index.entries = list(pool.map(lambda v: encode_entry(model, v, anchors, gamma), videos))

    logger.info(f"Indexed {len(index.entries)} videos x {len(anchors)} anchors")
    return index


def non_max_suppression(candidates: Sequence[Candidate], topk: int, nms_iou: float) -> List[RankedMoment]:
    """
    Greedy suppression over score-sorted candidates

    Sort key is (-score, center, width, video id). A candidate is dropped when it
    overlaps an already kept interval of the same video at IoU >= nms_iou;
    nms_iou >= 1 keeps everything.
    """
    ordered = sorted(candidates, key=lambda c: (-c[0], c[1].center, c[1].width, c[2]))
    kept: List[RankedMoment] = []
    for score, anchor, video_id, duration in ordered:
        start, end = anchor_to_interval(anchor, duration)
        if nms_iou < 1.0 and any(
                m.video_id == video_id and iou((m.t_start, m.t_end), (start, end)) >= nms_iou
                for m in kept):
            continue
        kept.append(RankedMoment(video_id=video_id, t_start=start, t_end=end, score=float(score)))
        if len(kept) == topk:
            break
    return kept


def _check_query_params(topk: int, nms_iou: float) -> None:
    if topk < 1:
        raise ValidationError(f"topk must be >= 1, got {topk}")
    if not 0 < nms_iou <= 1:
        raise ValidationError(f"nms iou must lie in (0, 1], got {nms_iou}")


class MomentRetriever:
    """Online query path over an immutable index; safe for concurrent callers"""

    def __init__(self, model: CFMRModel, index: ConceptIndex, sim_mode: str = 'rowwise'):
        if index.fingerprint != model.fingerprint():
            raise StaleIndexError(
                f"index fingerprint {index.fingerprint.hex()[:12]} does not match "
                f"model {model.fingerprint().hex()[:12]}; rebuild the index"
            )
        if (index.d_h, index.l_C) != (model.cfg.d_h, model.cfg.l_C):
            raise StaleIndexError('index concept dims do not match the model')
        self.model = model
        self.index = index
        self.sim_mode = sim_mode

    def encode_query(self, tokens: QueryTokens) -> np.ndarray:
        with no_grad():
            concepts, _ = self.model.text(tokens)
        return concepts.data

    def score_entry(self, entry: IndexEntry, query_concepts: np.ndarray) -> np.ndarray:
        return concept_similarity(entry.concepts, query_concepts, self.sim_mode)

    def query(self, tokens: QueryTokens, topk: int = 5, nms_iou: float = 0.7,
              video_id: Optional[str] = None) -> List[RankedMoment]:
        """
        Rank the anchors of one video, or of the whole corpus when video_id is None
        (corpus search is experimental)
        """
        _check_query_params(topk, nms_iou)
        query_concepts = self.encode_query(tokens)
        entries = [self.index.entry(video_id)] if video_id is not None else self.index.entries
        candidates: List[Candidate] = []
        for entry in entries:
            scores = self.score_entry(entry, query_concepts)
            candidates.extend((s, a, entry.video_id, entry.duration) for s, a in zip(scores, entry.anchors))
        return non_max_suppression(candidates, topk, nms_iou)


def query(index: ConceptIndex, tokens: QueryTokens, model: CFMRModel, topk: int = 5,
          nms_iou: float = 0.7, video_id: Optional[str] = None,
          sim_mode: str = 'rowwise') -> List[RankedMoment]:
    return MomentRetriever(model, index, sim_mode).query(tokens, topk, nms_iou, video_id)
