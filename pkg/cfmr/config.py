#!/usr/bin/env python3
"""Configuration settings: service environment and experiment files."""

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv

from cfmr.exceptions.custom_exceptions import ValidationError

load_dotenv()


class Config:
    """Base configuration class"""
    SECRET_KEY = os.getenv('SECRET_KEY', 'dev-secret-key-change-in-production')
    DEBUG = os.getenv('DEBUG', 'False') == 'True'
    TESTING = False

    # Server settings
    PORT = int(os.getenv('PORT', 5000))

    # API Key Authentication (empty list leaves the query endpoint open)
    API_KEYS = os.getenv('API_KEYS', '').split(',')
    API_KEYS = [key.strip() for key in API_KEYS if key.strip()]

    # Artifacts served online
    CFMR_MODEL_PATH = os.getenv('CFMR_MODEL_PATH', 'model.bin')
    CFMR_INDEX_PATH = os.getenv('CFMR_INDEX_PATH', 'index.bin')
    CFMR_LOG_LEVEL = os.getenv('CFMR_LOG_LEVEL', 'INFO')

    # Redis settings
    REDIS_HOST = os.getenv('REDIS_HOST', 'localhost')
    REDIS_PORT = int(os.getenv('REDIS_PORT', 6379))
    REDIS_DB = int(os.getenv('REDIS_DB', 0))
    REDIS_PASSWORD = os.getenv('REDIS_PASSWORD', None)
    QUERY_CACHE_TTL = int(os.getenv('QUERY_CACHE_TTL', 3600))  # seconds

    # Query defaults
    DEFAULT_TOPK = int(os.getenv('DEFAULT_TOPK', 5))
    DEFAULT_NMS_IOU = float(os.getenv('DEFAULT_NMS_IOU', 0.7))


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False


class TestingConfig(Config):
    """Testing configuration (no Redis, no keys)"""
    TESTING = True
    REDIS_HOST = ''
    API_KEYS: List[str] = []


config = {
    'default': DevelopmentConfig,
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
}


# ==================== EXPERIMENT CONFIG ====================

@dataclass
class EncoderConfig:
    """Dimensions shared by the concept encoders and the reconstructor"""
    d_h: int = 32
    layers: int = 2
    heads: int = 4
    ff_dim: int = 64
    l_V: int = 48
    l_Q: int = 20
    l_C: int = 4
    d_v: int = 8
    d_q: int = 32
    vocab_size: int = 40
    decoder_layers: int = 1

    @property
    def concept_dim(self) -> int:
        return self.l_C * self.d_h

    def validate(self) -> Optional[List[str]]:
        errors = []
        for name in ('d_h', 'layers', 'heads', 'ff_dim', 'l_V', 'l_Q', 'l_C', 'd_v', 'd_q',
                     'decoder_layers'):
            if getattr(self, name) < 1:
                errors.append(f"encoder.{name} must be >= 1")
        if self.heads >= 1 and self.d_h % self.heads != 0:
            errors.append(f"encoder.d_h ({self.d_h}) must be divisible by heads ({self.heads})")
        if self.l_C > self.d_h:
            errors.append(f"encoder.l_C ({self.l_C}) must not exceed d_h ({self.d_h})")
        if self.vocab_size < 4:
            errors.append('encoder.vocab_size must leave room for the reserved tokens')
        return errors if errors else None


@dataclass
class AnchorConfig:
    """Gaussian temporal anchor scheme"""
    gamma: float = 9.0
    v_max: float = 0.55
    scales: int = 3
    centers: int = 8
    min_segment: float = 0.05

    def validate(self) -> Optional[List[str]]:
        errors = []
        if self.gamma <= 0:
            errors.append('anchors.gamma must be > 0')
        if not 0 < self.v_max <= 1:
            errors.append('anchors.v_max must lie in (0, 1]')
        if self.scales < 1:
            errors.append('anchors.scales must be >= 1')
        if self.centers < 1:
            errors.append('anchors.centers must be >= 1')
        if not 0 <= self.min_segment < 1:
            errors.append('anchors.min_segment must lie in [0, 1)')
        return errors if errors else None


LOSS_NAMES = ('conc', 'cma', 'rec', 'pcl')
SIM_MODES = ('rowwise', 'flat')


@dataclass
class TrainConfig:
    """Training objective, optimizer and evaluation settings"""
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    anchors: AnchorConfig = field(default_factory=AnchorConfig)
    alpha1: float = 0.2
    alpha2: float = 0.1
    alpha3: float = 0.1
    alpha4: float = 0.2
    beta1: float = 1.0
    beta2: float = 1.0
    learning_rate: float = 4e-4
    batch_size: int = 32
    epochs: int = 30
    patience: int = 5
    mask_ratio: float = 0.5
    seed: int = 0
    sim_mode: str = 'rowwise'
    disabled_losses: Tuple[str, ...] = ()
    nms_iou: float = 0.7
    eval_topk: Tuple[int, ...] = (1, 5)
    eval_iou: Tuple[float, ...] = (0.5, 0.7)
    workers: int = 4

    def validate(self) -> Optional[List[str]]:
        errors = []
        errors.extend(self.encoder.validate() or [])
        errors.extend(self.anchors.validate() or [])
        if not self.alpha1 > self.alpha2:
            errors.append(f"alpha1 ({self.alpha1}) must be greater than alpha2 ({self.alpha2})")
        if not self.alpha3 <= self.alpha4:
            errors.append(f"alpha3 ({self.alpha3}) must not exceed alpha4 ({self.alpha4})")
        for name in ('alpha1', 'alpha2', 'alpha3', 'alpha4', 'beta1', 'beta2'):
            if getattr(self, name) < 0:
                errors.append(f"{name} must be >= 0")
        if self.learning_rate <= 0:
            errors.append('learning_rate must be > 0')
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            errors.append('batch_size, epochs and patience must be >= 1')
        if not 0 < self.mask_ratio <= 1:
            errors.append('mask_ratio must lie in (0, 1]')
        if self.sim_mode not in SIM_MODES:
            errors.append(f"sim_mode must be one of {SIM_MODES}")
        unknown = set(self.disabled_losses) - set(LOSS_NAMES)
        if unknown:
            errors.append(f"unknown disabled_losses {sorted(unknown)}; choose from {LOSS_NAMES}")
        if not 0 < self.nms_iou <= 1:
            errors.append('nms_iou must lie in (0, 1]')
        if not self.eval_topk or min(self.eval_topk) < 1:
            errors.append('eval_topk entries must be >= 1')
        if not self.eval_iou or not all(0 < m <= 1 for m in self.eval_iou):
            errors.append('eval_iou entries must lie in (0, 1]')
        return errors if errors else None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['disabled_losses'] = list(self.disabled_losses)
        data['eval_topk'] = list(self.eval_topk)
        data['eval_iou'] = list(self.eval_iou)
        return data


@dataclass
class SyntheticSpec:
    """Point-annotated synthetic corpus"""
    train_videos: int = 200
    test_videos: int = 50
    l_V: int = 48
    d_v: int = 8
    vocab_size: int = 40
    function_words: int = 8
    content_per_query: int = 2
    events_per_video: int = 2
    event_length: Tuple[float, float] = (0.15, 0.35)
    duration: Tuple[float, float] = (20.0, 40.0)
    noise: float = 0.3
    seed: int = 0

    def validate(self) -> Optional[List[str]]:
        errors = []
        if self.train_videos < 0 or self.test_videos < 0:
            errors.append('video counts must be >= 0')
        if self.l_V < 1 or self.d_v < 1:
            errors.append('l_V and d_v must be >= 1')
        if self.events_per_video < 1 or self.content_per_query < 1:
            errors.append('events_per_video and content_per_query must be >= 1')
        low, high = self.event_length
        if not 0 < low <= high <= 1:
            errors.append('event_length must satisfy 0 < min <= max <= 1')
        if not 0 < self.duration[0] <= self.duration[1]:
            errors.append('duration must satisfy 0 < min <= max')
        if self.noise < 0:
            errors.append('noise must be >= 0')
        content_words = self.vocab_size - 3 - self.function_words
        if self.function_words < 1 or content_words < self.content_per_query * self.events_per_video:
            errors.append(
                f"vocab_size {self.vocab_size} leaves {content_words} content words, "
                f"need at least {self.content_per_query * self.events_per_video}"
            )
        return errors if errors else None


# Published per-dataset settings; d_h / layers / heads are not published and are sized so
# the inference encoders land near the reported parameter count.
PRESETS: Dict[str, Dict[str, Any]] = {
    'desk': {
        'encoder': {'d_h': 32, 'layers': 2, 'heads': 4, 'ff_dim': 64, 'l_V': 48, 'l_Q': 20,
                    'l_C': 4, 'd_v': 8, 'd_q': 32, 'vocab_size': 40},
        'anchors': {'gamma': 9.0, 'v_max': 0.55, 'scales': 3, 'centers': 6},
    },
    'charades': {
        'encoder': {'d_h': 192, 'layers': 2, 'heads': 8, 'ff_dim': 384, 'l_V': 200, 'l_Q': 20,
                    'l_C': 7, 'd_v': 1024, 'd_q': 300, 'vocab_size': 1200},
        'anchors': {'gamma': 9.0, 'v_max': 0.55, 'scales': 3, 'centers': 8},
        'eval_iou': [0.5, 0.7],
    },
    'activitynet': {
        'encoder': {'d_h': 192, 'layers': 2, 'heads': 8, 'ff_dim': 384, 'l_V': 200, 'l_Q': 20,
                    'l_C': 8, 'd_v': 500, 'd_q': 300, 'vocab_size': 10000},
        'anchors': {'gamma': 9.0, 'v_max': 0.66, 'scales': 3, 'centers': 4},
        'eval_iou': [0.5, 0.7],
    },
    'tacos': {
        'encoder': {'d_h': 192, 'layers': 2, 'heads': 8, 'ff_dim': 384, 'l_V': 512, 'l_Q': 20,
                    'l_C': 3, 'd_v': 500, 'd_q': 300, 'vocab_size': 1500},
        'anchors': {'gamma': 9.0, 'v_max': 0.3, 'scales': 3, 'centers': 15},
        'eval_iou': [0.3, 0.5],
    },
}


def _build(cls, data: Dict[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown keys in {section}: {sorted(unknown)}")
    return cls(**data)


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def train_config_from_dict(data: Dict[str, Any]) -> TrainConfig:
    """Build and validate a TrainConfig; an optional 'preset' key seeds the values"""
    data = dict(data or {})
    preset = data.pop('preset', None)
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset '{preset}'; choose from {sorted(PRESETS)}")
        data = _merge(PRESETS[preset], data)

    encoder = _build(EncoderConfig, data.pop('encoder', {}) or {}, 'encoder')
    anchors = _build(AnchorConfig, data.pop('anchors', {}) or {}, 'anchors')
    for key in ('disabled_losses', 'eval_topk', 'eval_iou'):
        if key in data:
            data[key] = tuple(data[key])
    cfg = _build(TrainConfig, data, 'train config')
    cfg = replace(cfg, encoder=encoder, anchors=anchors)

    errors = cfg.validate()
    if errors:
        raise ValidationError('Invalid train config: ' + '; '.join(errors))
    return cfg


def load_yaml(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return yaml.safe_load(handle) or {}
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        raise ValidationError(f"config file {path} is not valid YAML: {e}")


def load_train_config(path: str) -> TrainConfig:
    return train_config_from_dict(load_yaml(path))


def load_synthetic_spec(path: str) -> SyntheticSpec:
    data = dict(load_yaml(path))
    for key in ('event_length', 'duration'):
        if key in data:
            data[key] = tuple(data[key])
    spec = _build(SyntheticSpec, data, 'synthetic spec')
    errors = spec.validate()
    if errors:
        raise ValidationError('Invalid synthetic spec: ' + '; '.join(errors))
    return spec


def save_yaml(data: Dict[str, Any], path: Path) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        yaml.safe_dump(data, handle, sort_keys=False)
