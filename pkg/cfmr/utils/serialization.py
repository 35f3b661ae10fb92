"""
Binary codecs for feature files and concept indexes (little-endian)

Feature file:  "CFMRFEA1" | u32 l_V | u32 d_v | f32 duration | f32[l_V * d_v] row-major
Index file:    "CFMRIDX1" | u32 version | u32 d_h | u32 l_C | u32 centers | u32 scales
               | f64 v_max | f64 gamma | 32-byte fingerprint | u32 videos
               then per video: u16 id length | utf-8 id | f64 duration | u32 anchors
               | f64[anchors, 2] (center, width) | u32[anchors] scale | f32[anchors, l_C, d_h]
"""

import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from cfmr.exceptions.custom_exceptions import CorruptionError, DataFormatError
from cfmr.models.domain import ConceptIndex, FeatureSequence, GaussianAnchor, IndexEntry

FEATURE_MAGIC = b'CFMRFEA1'
INDEX_MAGIC = b'CFMRIDX1'
INDEX_VERSION = 1

_FEATURE_HEADER = struct.Struct('<IIf')
_INDEX_HEADER = struct.Struct('<IIIIIdd32sI')
_VIDEO_HEADER = struct.Struct('<dI')


class _Reader:
    """Cursor over a byte buffer that reports truncation as corruption"""

    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CorruptionError(
                f"{self.source}: truncated at byte {len(self.data)}, needed {end}"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, layout: struct.Struct) -> Tuple:
        return layout.unpack(self.take(layout.size))

    def array(self, dtype: str, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(count * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    def remaining(self) -> int:
        return len(self.data) - self.offset


def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise DataFormatError(f"file not found: {path}")


# ==================== FEATURE FILES ====================

def encode_features(sequence: FeatureSequence) -> bytes:
    l_V, d_v = sequence.features.shape
    return (FEATURE_MAGIC
            + _FEATURE_HEADER.pack(l_V, d_v, sequence.duration)
            + np.ascontiguousarray(sequence.features, dtype='<f4').tobytes())


def decode_features(data: bytes, video_id: str, source: str = '<bytes>') -> FeatureSequence:
    if data[:len(FEATURE_MAGIC)] != FEATURE_MAGIC:
        raise DataFormatError(f"{source}: bad magic, not a feature file")
    reader = _Reader(data, source)
    reader.take(len(FEATURE_MAGIC))
    l_V, d_v, duration = reader.unpack(_FEATURE_HEADER)
    if l_V == 0 or d_v == 0:
        raise DataFormatError(f"{source}: empty video (l_V={l_V}, d_v={d_v})")
    if not np.isfinite(duration) or duration <= 0:
        raise CorruptionError(f"{source}: duration {duration} is not a positive number of seconds")
    features = reader.array('<f4', (l_V, d_v))
    if reader.remaining():
        raise CorruptionError(f"{source}: {reader.remaining()} trailing bytes after payload")
    if not np.all(np.isfinite(features)):
        bad = int(np.count_nonzero(~np.isfinite(features)))
        raise CorruptionError(f"{source}: {bad} non-finite feature values")
    return FeatureSequence(video_id=video_id, features=features.astype(np.float64),
                           duration=float(duration))


def write_feature_file(sequence: FeatureSequence, path: Path) -> None:
    Path(path).write_bytes(encode_features(sequence))


def read_feature_file(path: Path) -> FeatureSequence:
    path = Path(path)
    return decode_features(_read_bytes(path), video_id=path.stem, source=str(path))


# ==================== CONCEPT INDEX ====================

def encode_index(index: ConceptIndex) -> bytes:
    if len(index.fingerprint) != 32:
        raise DataFormatError('index fingerprint must be 32 bytes')
    parts = [
        INDEX_MAGIC,
        _INDEX_HEADER.pack(INDEX_VERSION, index.d_h, index.l_C, index.centers, index.scales,
                           index.v_max, index.gamma, index.fingerprint, len(index.entries)),
    ]
    for entry in index.entries:
        video_id = entry.video_id.encode('utf-8')
        parts.append(struct.pack('<H', len(video_id)) + video_id)
        parts.append(_VIDEO_HEADER.pack(entry.duration, len(entry.anchors)))
        geometry = np.array([[a.center, a.width] for a in entry.anchors], dtype='<f8').reshape(-1, 2)
        parts.append(geometry.tobytes())
        parts.append(np.array([a.scale for a in entry.anchors], dtype='<u4').tobytes())
        concepts = np.ascontiguousarray(entry.concepts, dtype='<f4')
        if concepts.shape != (len(entry.anchors), index.l_C, index.d_h):
            raise DataFormatError(
                f"video {entry.video_id}: concepts shape {concepts.shape} does not match header"
            )
        parts.append(concepts.tobytes())
    return b''.join(parts)


def decode_index(data: bytes, source: str = '<bytes>') -> ConceptIndex:
    if data[:len(INDEX_MAGIC)] != INDEX_MAGIC:
        raise DataFormatError(f"{source}: bad magic, not a concept index")
    reader = _Reader(data, source)
    reader.take(len(INDEX_MAGIC))
    version, d_h, l_C, centers, scales, v_max, gamma, fingerprint, videos = reader.unpack(_INDEX_HEADER)
    if version != INDEX_VERSION:
        raise DataFormatError(f"{source}: unsupported index version {version}")

    index = ConceptIndex(d_h=d_h, l_C=l_C, centers=centers, scales=scales, v_max=v_max,
                         gamma=gamma, fingerprint=fingerprint)
    grid_size = centers * scales
    # every video shares the first video's grid
    grid = None
    for _ in range(videos):
        (id_length,) = struct.unpack('<H', reader.take(2))
        try:
            video_id = reader.take(id_length).decode('utf-8')
        except UnicodeDecodeError:
            raise CorruptionError(f"{source}: video id is not valid utf-8")
        duration, count = reader.unpack(_VIDEO_HEADER)
        if count != grid_size:
            raise CorruptionError(
                f"{source}: video {video_id} has {count} anchors, the {centers}x{scales} grid has {grid_size}"
            )
        geometry = reader.array('<f8', (count, 2))
        scale_ids = reader.array('<u4', (count,))
        if grid is None:
            grid = (geometry, scale_ids)
        elif not (np.array_equal(geometry, grid[0]) and np.array_equal(scale_ids, grid[1])):
            raise CorruptionError(f"{source}: video {video_id} does not share the index anchor grid")
        concepts = reader.array('<f4', (count, l_C, d_h)).astype(np.float32)
        anchors = [GaussianAnchor(center=float(c), width=float(w), scale=int(s))
                   for (c, w), s in zip(geometry, scale_ids)]
        index.entries.append(IndexEntry(video_id=video_id, duration=duration,
                                        anchors=anchors, concepts=concepts))
    if reader.remaining():
        raise CorruptionError(
            f"{source}: {reader.remaining()} bytes beyond the {videos} declared videos"
        )
    return index


def save_index(index: ConceptIndex, path: Path) -> None:
    Path(path).write_bytes(encode_index(index))


def load_index(path: Path) -> ConceptIndex:
    return decode_index(_read_bytes(path), source=str(path))
