"""
Analytic FLOPs and parameter counts for the offline / online split

Counting rules:
    projection (t tokens, m -> n):  2 * t * m * n   (bias adds are not counted)
    attention (t queries, s keys):  2 * t * s * d for the scores, again for the weighted sum
    softmax, layer norm, ReLU, anchor re-weighting: 1 FLOP per element
Residual adds and the anchor densities themselves are not counted.
"""

from dataclasses import dataclass, replace
from typing import Dict, Iterable, Sequence

import pandas as pd

from cfmr.config import AnchorConfig, EncoderConfig
from cfmr.exceptions.custom_exceptions import ValidationError

DEFAULT_SWEEP = (100, 200, 400, 800)


def linear_flops(tokens: int, in_dim: int, out_dim: int) -> int:
    return 2 * tokens * in_dim * out_dim


def attention_flops(queries: int, keys: int, dim: int, heads: int, reweighted: bool = False) -> int:
    flops = 2 * queries * keys * dim  # scores
    flops += 2 * queries * keys * dim  # weighted sum of values
    flops += heads * queries * keys  # softmax
    if reweighted:
        flops += heads * queries * keys
    return flops


def encoder_layer_flops(tokens: int, cfg: EncoderConfig, reweighted: bool = False) -> int:
    d = cfg.d_h
    flops = 2 * tokens * d  # two layer norms
    flops += 4 * linear_flops(tokens, d, d)  # q, k, v, output
    flops += attention_flops(tokens, tokens, d, cfg.heads, reweighted)
    flops += linear_flops(tokens, d, cfg.ff_dim) + tokens * cfg.ff_dim + linear_flops(tokens, cfg.ff_dim, d)
    return flops


def concept_head_flops(cfg: EncoderConfig) -> int:
    """Concept MLP on the CLS state"""
    d = cfg.d_h
    return linear_flops(1, d, d) + d + linear_flops(1, d, cfg.concept_dim)


def encoder_pass_flops(positions: int, in_dim: int, cfg: EncoderConfig, reweighted: bool) -> int:
    tokens = positions + 1  # CLS
    flops = linear_flops(positions, in_dim, cfg.d_h)
    flops += cfg.layers * encoder_layer_flops(tokens, cfg, reweighted)
    flops += tokens * cfg.d_h  # final norm
    return flops + concept_head_flops(cfg)


def scoring_flops(anchors: int, cfg: EncoderConfig) -> int:
    """Row-wise cosine of every anchor's concept set against the query's"""
    per_concept = 6 * cfg.d_h + 3  # dot, two squared norms, product, sqrt, divide
    return anchors * cfg.l_C * (per_concept + 1)


# ==================== PARAMETERS ====================

def _linear_params(m: int, n: int) -> int:
    return m * n + n


def _encoder_layer_params(cfg: EncoderConfig) -> int:
    d = cfg.d_h
    return 2 * 2 * d + 4 * _linear_params(d, d) + _linear_params(d, cfg.ff_dim) + _linear_params(cfg.ff_dim, d)


def _decoder_layer_params(cfg: EncoderConfig) -> int:
    d = cfg.d_h
    return 3 * 2 * d + 8 * _linear_params(d, d) + _linear_params(d, cfg.ff_dim) + _linear_params(cfg.ff_dim, d)


def _concept_encoder_params(in_dim: int, max_len: int, cfg: EncoderConfig) -> int:
    d = cfg.d_h
    return (_linear_params(in_dim, d) + d + (max_len + 1) * d
            + cfg.layers * _encoder_layer_params(cfg) + 2 * d
            + _linear_params(d, d) + _linear_params(d, cfg.concept_dim))


def parameter_counts(cfg: EncoderConfig) -> Dict[str, int]:
    text = cfg.vocab_size * cfg.d_q + _concept_encoder_params(cfg.d_q, cfg.l_Q, cfg)
    video = _concept_encoder_params(cfg.d_v, cfg.l_V, cfg)
    reconstructor = (_linear_params(cfg.d_q, cfg.d_h) + cfg.l_Q * cfg.d_h
                     + cfg.decoder_layers * _decoder_layer_params(cfg) + 2 * cfg.d_h
                     + _linear_params(cfg.d_h, cfg.vocab_size))
    return {
        'text': text,
        'video': video,
        'reconstructor': reconstructor,
        'inference': text + video,
        'total': text + video + reconstructor,
    }


# ==================== REPORTS ====================

@dataclass
class FlopsReport:
    l_V: int
    anchors: int
    offline: int
    online: int
    parameters_inference: int
    parameters_total: int

    @property
    def online_share(self) -> float:
        return self.online / (self.online + self.offline)

    def to_dict(self) -> Dict:
        return {
            'l_V': self.l_V,
            'anchors': self.anchors,
            'offline_flops': self.offline,
            'online_flops': self.online,
            'online_share': self.online_share,
            'parameters_inference': self.parameters_inference,
            'parameters_total': self.parameters_total,
        }


def flops_report(cfg: EncoderConfig, anchors: AnchorConfig, l_V: int) -> FlopsReport:
    """
    offline: video encoder over every grid anchor of one l_V-long video
    online:  one text pass at full query length plus concept scoring; no l_V term
    """
    if l_V < 1:
        raise ValidationError(f"l_V must be >= 1, got {l_V}")
    grid = anchors.centers * anchors.scales
    sized = replace(cfg, l_V=l_V)
    offline = grid * encoder_pass_flops(l_V, cfg.d_v, sized, reweighted=True)
    online = encoder_pass_flops(cfg.l_Q, cfg.d_q, cfg, reweighted=False) + scoring_flops(grid, cfg)
    params = parameter_counts(sized)
    return FlopsReport(l_V=l_V, anchors=grid, offline=offline, online=online,
                       parameters_inference=params['inference'], parameters_total=params['total'])


def length_sweep(cfg: EncoderConfig, anchors: AnchorConfig,
                 lengths: Iterable[int] = DEFAULT_SWEEP) -> pd.DataFrame:
    return pd.DataFrame([flops_report(cfg, anchors, l_V).to_dict() for l_V in lengths])


def concept_sweep(cfg: EncoderConfig, anchors: AnchorConfig, concept_counts: Sequence[int]) -> pd.DataFrame:
    """FLOPs and parameters as the number of concepts varies"""
    rows = []
    for l_C in concept_counts:
        if not 1 <= l_C <= cfg.d_h:
            raise ValidationError(f"l_C must lie in [1, {cfg.d_h}], got {l_C}")
        row = flops_report(replace(cfg, l_C=l_C), anchors, cfg.l_V).to_dict()
        row['l_C'] = l_C
        rows.append(row)
    return pd.DataFrame(rows)
