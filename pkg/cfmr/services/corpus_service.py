"""
Synthetic point-annotated corpus and the on-disk corpus layout

    <dir>/vocab.json
    <dir>/features/<video_id>.fea
    <dir>/train.jsonl   {"video_id", "text", "tokens", "point"}
    <dir>/test.jsonl    {"video_id", "text", "tokens", "t_start", "t_end"}
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from cfmr.config import SyntheticSpec
from cfmr.exceptions.custom_exceptions import DataFormatError, ValidationError
from cfmr.models.domain import FeatureSequence, IntervalSample, PointSample
from cfmr.services.vocabulary import RESERVED, Vocabulary
from cfmr.utils.serialization import read_feature_file, write_feature_file

logger = logging.getLogger(__name__)


@dataclass
class Corpus:
    vocab: Vocabulary
    videos: Dict[str, FeatureSequence]
    train: List[PointSample] = field(default_factory=list)
    test: List[IntervalSample] = field(default_factory=list)
    # generator only: unit latent pattern per content token, keyed by token id
    token_patterns: Optional[Dict[int, np.ndarray]] = None

    def video(self, video_id: str) -> FeatureSequence:
        try:
            return self.videos[video_id]
        except KeyError:
            raise DataFormatError(f"sample refers to unknown video '{video_id}'")

    def test_videos(self) -> List[FeatureSequence]:
        ids = dict.fromkeys(s.video_id for s in self.test)
        return [self.video(v) for v in ids]


# ==================== GENERATION ====================

def _event_lengths(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    low, high = spec.event_length
    count = spec.events_per_video
    lengths = rng.uniform(low, high, size=count)
    total = lengths.sum()
    if total > 1.0:
        # shrink toward the minimum length until the events fit
        lengths = low + (lengths - low) * (1.0 - count * low) / (total - count * low)
    return lengths


def _place_events(lengths: np.ndarray, rng: np.random.Generator) -> List[Tuple[float, float]]:
    free = max(0.0, 1.0 - float(lengths.sum()))
    gaps = free * rng.dirichlet(np.ones(len(lengths) + 1))
    spans = []
    cursor = 0.0
    for gap, length in zip(gaps, lengths):
        start = cursor + gap
        end = min(1.0, start + length)
        spans.append((float(start), float(end)))
        cursor = end
    return spans


def _event_frames(span: Tuple[float, float], l_V: int) -> np.ndarray:
    """Frames whose midpoint falls inside the span (at least the nearest one)"""
    mids = (np.arange(l_V) + 0.5) / l_V
    frames = np.flatnonzero((mids >= span[0]) & (mids < span[1]))
    if frames.size == 0:
        frames = np.array([min(l_V - 1, int(span[0] * l_V))])
    return frames


def event_pattern(token_ids: List[int], token_patterns: Dict[int, np.ndarray]) -> np.ndarray:
    """Unit-norm mean of the content tokens' latent patterns"""
    mean = np.mean([token_patterns[t] for t in token_ids], axis=0)
    return mean / np.linalg.norm(mean)


def generate_corpus(spec: SyntheticSpec) -> Corpus:
    """
    Noise videos whose event segments are overwritten by token-conditioned patterns

    Every event gets its own content tokens, so the other events of the same
    video act as hard negatives. Training samples carry one point drawn
    uniformly inside the event; test samples keep the interval in seconds.
    """
    errors = spec.validate()
    if errors:
        raise ValidationError('Invalid synthetic spec: ' + '; '.join(errors))
    if spec.events_per_video * spec.event_length[0] > 1.0:
        raise ValidationError(
            f"{spec.events_per_video} events of length >= {spec.event_length[0]} cannot fit disjointly"
        )

    rng = np.random.default_rng(spec.seed)
    function_words = [f"f{i}" for i in range(spec.function_words)]
    content_words = [f"c{i}" for i in range(spec.vocab_size - len(RESERVED) - spec.function_words)]
    vocab = Vocabulary(function_words + content_words, function_words)
    function_ids = np.array([vocab.index[w] for w in function_words])
    content_ids = np.array([vocab.index[w] for w in content_words])

    raw = rng.standard_normal((len(content_ids), spec.d_v))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    token_patterns = {int(t): raw[i] for i, t in enumerate(content_ids)}
    amplitude = np.sqrt(spec.d_v)

    corpus = Corpus(vocab=vocab, videos={}, token_patterns=token_patterns)
    splits = [('train', spec.train_videos), ('test', spec.test_videos)]
    for split, count in splits:
        for n in range(count):
            video_id = f"{split}_{n:05d}"
            duration = float(np.float32(round(rng.uniform(*spec.duration), 2)))
            features = spec.noise * rng.standard_normal((spec.l_V, spec.d_v))
            spans = _place_events(_event_lengths(spec, rng), rng)
            tokens = rng.choice(content_ids, size=(len(spans), spec.content_per_query), replace=False)

            for span, event_tokens in zip(spans, tokens):
                event_tokens = [int(t) for t in event_tokens]
                frames = _event_frames(span, spec.l_V)
                pattern = amplitude * event_pattern(event_tokens, token_patterns)
                features[frames] = pattern + spec.noise * rng.standard_normal((frames.size, spec.d_v))

                fillers = rng.choice(function_ids, size=len(event_tokens))
                ids = [i for pair in zip(fillers, event_tokens) for i in pair]
                query = vocab.tokens_for(ids)
                if split == 'train':
                    point = float(rng.uniform(span[0], span[1]))
                    corpus.train.append(PointSample(video_id=video_id, query=query, point=point))
                else:
                    corpus.test.append(IntervalSample(video_id=video_id, query=query,
                                                      t_start=span[0] * duration,
                                                      t_end=span[1] * duration))

            corpus.videos[video_id] = FeatureSequence(
                video_id=video_id, features=features.astype(np.float32), duration=duration,
            )

    logger.info(
        f"Generated corpus: {len(corpus.videos)} videos, {len(corpus.train)} train / "
        f"{len(corpus.test)} test samples"
    )
    return corpus


# ==================== PERSISTENCE ====================

def _write_jsonl(path: Path, records: List[Dict]) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        for record in records:
            handle.write(json.dumps(record) + '\n')


def _read_jsonl(path: Path) -> Iterator[Dict]:
    if not path.exists():
        return
    with open(path, 'r', encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}:{number}: invalid JSON ({e})")


def save_corpus(corpus: Corpus, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    features_dir = out_dir / 'features'
    features_dir.mkdir(parents=True, exist_ok=True)
    corpus.vocab.save(out_dir / 'vocab.json')
    for video in corpus.videos.values():
        write_feature_file(video, features_dir / f"{video.video_id}.fea")

    _write_jsonl(out_dir / 'train.jsonl', [
        {'video_id': s.video_id, 'text': corpus.vocab.decode(s.query.ids),
         'tokens': s.query.ids.tolist(), 'point': s.point}
        for s in corpus.train
    ])
    _write_jsonl(out_dir / 'test.jsonl', [
        {'video_id': s.video_id, 'text': corpus.vocab.decode(s.query.ids),
         'tokens': s.query.ids.tolist(), 't_start': s.t_start, 't_end': s.t_end}
        for s in corpus.test
    ])


def _record_tokens(record: Dict, vocab: Vocabulary):
    if 'tokens' in record:
        return vocab.tokens_for(record['tokens'])
    if 'text' in record:
        return vocab.encode(record['text'])
    raise DataFormatError("annotation record has neither 'tokens' nor 'text'")


def load_corpus(data_dir: Path, stoplist: Optional[Path] = None) -> Corpus:
    """
    Read a corpus directory; training records listing several points are split
    into one sample per point

    Args:
        data_dir: corpus directory
        stoplist: one-word-per-line file replacing the stored function words;
            applied before any record is encoded
    """
    data_dir = Path(data_dir)
    if not (data_dir / 'vocab.json').exists():
        raise DataFormatError(f"{data_dir} has no vocab.json")
    vocab = Vocabulary.load(data_dir / 'vocab.json')
    if stoplist is not None:
        vocab = Vocabulary.with_stoplist(vocab.tokens[len(RESERVED):], stoplist)
        logger.info(f"Function words from {stoplist}: {len(vocab.function_words)}")
    videos = {}
    for path in sorted((data_dir / 'features').glob('*.fea')):
        video = read_feature_file(path)
        videos[video.video_id] = video

    corpus = Corpus(vocab=vocab, videos=videos)
    try:
        for record in _read_jsonl(data_dir / 'train.jsonl'):
            query = _record_tokens(record, vocab)
            points = record['points'] if 'points' in record else [record['point']]
            for point in points:
                corpus.train.append(PointSample(video_id=record['video_id'], query=query, point=float(point)))
        for record in _read_jsonl(data_dir / 'test.jsonl'):
            corpus.test.append(IntervalSample(
                video_id=record['video_id'], query=_record_tokens(record, vocab),
                t_start=float(record['t_start']), t_end=float(record['t_end']),
            ))
    except KeyError as e:
        raise DataFormatError(f"annotation record is missing field {e}")

    for sample in [*corpus.train, *corpus.test]:
        corpus.video(sample.video_id)
    logger.info(f"Loaded corpus from {data_dir}: {len(videos)} videos")
    return corpus
