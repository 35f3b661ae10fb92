#!/usr/bin/env python3
"""Domain types shared across services."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from cfmr.exceptions.custom_exceptions import InputError


@dataclass
class FeatureSequence:
    """Per-video sequence of fixed-dimension feature vectors"""
    video_id: str
    features: np.ndarray  # (l_V, d_v)
    duration: float  # seconds

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise InputError(f"video {self.video_id}: features must be a non-empty (l_V, d_v) matrix")
        if not self.duration > 0:
            raise InputError(f"video {self.video_id}: duration must be > 0")

    @property
    def length(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class QueryTokens:
    """Token ids with content-token flags"""
    ids: np.ndarray
    content: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.content = np.asarray(self.content, dtype=bool)
        if self.ids.ndim != 1 or self.ids.shape != self.content.shape:
            raise InputError('query ids and content flags must be 1-D and of equal length')

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def content_positions(self) -> np.ndarray:
        return np.flatnonzero(self.content)

    def to_dict(self) -> Dict:
        return {'ids': self.ids.tolist(), 'content': self.content.astype(int).tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'QueryTokens':
        return cls(np.asarray(data['ids']), np.asarray(data['content'], dtype=bool))


@dataclass(frozen=True)
class GaussianAnchor:
    """Candidate moment: normalized center e, normalized width v, scale index n"""
    center: float
    width: float
    scale: int = 0


@dataclass
class AnchorSet:
    """Anchors for one training sample or the inference grid"""
    positives: List[GaussianAnchor]
    negatives: List[GaussianAnchor] = field(default_factory=list)
    include_whole_video: bool = True


@dataclass
class MaskedQuery:
    """Query with content tokens replaced by the mask id"""
    ids: np.ndarray
    mask: np.ndarray  # bool per position
    targets: np.ndarray  # original ids at masked positions

    @property
    def positions(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass
class ReconLossTriple:
    """Video-conditioned reconstruction losses: optimal anchor, negatives (mean), whole video

    Values are floats for reporting or scalar Tensors inside the training graph.
    """
    optimal: Any
    negative: Optional[Any]
    whole: Any


@dataclass
class PointSample:
    """Training sample: one query and the point annotated inside its target event"""
    video_id: str
    query: QueryTokens
    point: float

    def __post_init__(self):
        if not 0.0 <= self.point <= 1.0:
            raise InputError(f"point {self.point} outside [0, 1] for video {self.video_id}")


@dataclass
class IntervalSample:
    """Evaluation sample with the full target interval in seconds"""
    video_id: str
    query: QueryTokens
    t_start: float
    t_end: float


@dataclass(frozen=True)
class RankedMoment:
    video_id: str
    t_start: float
    t_end: float
    score: float

    def to_dict(self) -> Dict:
        return {
            'video_id': self.video_id,
            't_start': round(self.t_start, 6),
            't_end': round(self.t_end, 6),
            'score': self.score,
        }


@dataclass
class IndexEntry:
    """Concepts of every grid anchor for one video"""
    video_id: str
    duration: float
    anchors: List[GaussianAnchor]
    concepts: np.ndarray  # (anchors, l_C, d_h) float32


@dataclass
class ConceptIndex:
    d_h: int
    l_C: int
    centers: int
    scales: int
    v_max: float
    gamma: float
    fingerprint: bytes
    entries: List[IndexEntry] = field(default_factory=list)

    def entry(self, video_id: str) -> IndexEntry:
        for entry in self.entries:
            if entry.video_id == video_id:
                return entry
        raise InputError(f"video '{video_id}' is not in the index")

    @property
    def anchor_count(self) -> int:
        return sum(len(e.anchors) for e in self.entries)

    def header(self) -> Dict:
        return {
            'd_h': self.d_h,
            'l_C': self.l_C,
            'centers': self.centers,
            'scales': self.scales,
            'v_max': self.v_max,
            'gamma': self.gamma,
            'fingerprint': self.fingerprint.hex(),
            'videos': len(self.entries),
            'entries': self.anchor_count,
        }


@dataclass
class EvalResult:
    """Recall table keyed by (K, m) plus auxiliary metrics"""
    recall: Dict[Tuple[int, float], float]
    samples: int
    mean_iou: float = 0.0

    def check_monotone(self) -> List[str]:
        """Recall must not decrease with K nor increase with m"""
        problems = []
        ks = sorted({k for k, _ in self.recall})
        ms = sorted({m for _, m in self.recall})
        for k in ks:
            for lo, hi in zip(ms, ms[1:]):
                if self.recall[(k, hi)] > self.recall[(k, lo)]:
                    problems.append(f"R@{k} increases from IoU={lo} to IoU={hi}")
        for m in ms:
            for lo, hi in zip(ks, ks[1:]):
                if self.recall[(lo, m)] > self.recall[(hi, m)]:
                    problems.append(f"IoU={m}: R@{lo} exceeds R@{hi}")
        return problems

    def to_dict(self) -> Dict:
        return {
            'samples': self.samples,
            'mean_iou': self.mean_iou,
            'recall': {f"R@{k},IoU={m}": v for (k, m), v in sorted(self.recall.items())},
        }
