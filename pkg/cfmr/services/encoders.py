"""
Text and video concept encoders

Both encoders append a learned CLS token at the end of the sequence, run a stack
of pre-norm transformer layers and decompose the final CLS state into l_C
concept vectors. The video encoder re-weights every attention row by the
density of a Gaussian temporal anchor; the two encoders never see each other.
"""

from typing import List, Optional, Tuple

import numpy as np

from cfmr.config import EncoderConfig
from cfmr.exceptions.custom_exceptions import ConfigurationError, InputError
from cfmr.kernel.layers import (
    MLP, Embedding, EncoderLayer, LayerNorm, Linear, Module, Parameter, xavier_uniform,
)
from cfmr.kernel.tensor import ArrayLike, Tensor, as_tensor, concat
from cfmr.models.domain import FeatureSequence, QueryTokens


def split_concepts(x: ArrayLike, l_C: int) -> Tensor:
    """Contiguous equal-size split of the last axis into l_C rows"""
    x = as_tensor(x)
    width = x.shape[-1]
    if l_C < 1 or width % l_C != 0:
        raise ConfigurationError(f"output dim {width} cannot be split into {l_C} concepts")
    return x.reshape(*x.shape[:-1], l_C, width // l_C)


def make_concepts(cls_state: ArrayLike, mlp: MLP, l_C: int) -> Tensor:
    """Project the CLS state with the concept MLP and split it into l_C concepts"""
    return split_concepts(mlp(cls_state), l_C)


def diversity_loss(concepts: ArrayLike) -> Tensor:
    """||C C^T - I||_F^2 per concept set (summed over any leading batch axes)"""
    concepts = as_tensor(concepts)
    gram = concepts @ concepts.swapaxes(-1, -2)
    diff = gram - np.eye(concepts.shape[-2])
    return (diff * diff).sum()


class _ConceptEncoder(Module):
    """Shared body: input projection, CLS, positions, encoder stack, concept MLP"""

    def __init__(self, in_dim: int, max_len: int, cfg: EncoderConfig, rng: np.random.Generator):
        self.l_C = cfg.l_C
        self.input_proj = Linear(in_dim, cfg.d_h, rng)
        self.cls = Parameter(xavier_uniform(rng, 1, cfg.d_h))
        self.positions = Parameter(xavier_uniform(rng, max_len + 1, cfg.d_h))
        self.layers = [EncoderLayer(cfg.d_h, cfg.heads, cfg.ff_dim, rng) for _ in range(cfg.layers)]
        self.final_norm = LayerNorm(cfg.d_h)
        self.concept_mlp = MLP(cfg.d_h, cfg.d_h, cfg.concept_dim, rng)

    def _embed(self, inputs: ArrayLike) -> Tensor:
        x = self.input_proj(inputs)
        x = concat([x, self.cls], axis=0)
        return x + self.positions[:x.shape[0]]

    def _encode(self, x: Tensor, row_weights: Optional[np.ndarray],
                attention_maps: Optional[List[np.ndarray]]) -> Tensor:
        for layer in self.layers:
            x = layer(x, row_weights=row_weights, attention_maps=attention_maps)
        return self.final_norm(x)


class TextConceptEncoder(_ConceptEncoder):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.max_len = cfg.l_Q
        self.embedding = Embedding(cfg.vocab_size, cfg.d_q, rng)
        super().__init__(cfg.d_q, cfg.l_Q, cfg, rng)

    def word_features(self, ids) -> Tensor:
        """Word feature table lookup (also feeds the masked query to the reconstructor)"""
        return self.embedding(ids)

    def forward(self, query: QueryTokens,
                attention_maps: Optional[List[np.ndarray]] = None) -> Tuple[Tensor, Tensor]:
        """
        Returns:
            (concepts (l_C, d_h), final hidden states (len(query) + 1, d_h));
            the CLS state is the last hidden row
        """
        if len(query) == 0:
            raise InputError('query is empty')
        if len(query) > self.max_len:
            raise InputError(f"query has {len(query)} tokens, limit is {self.max_len}")

        x = self._embed(self.word_features(query.ids))
        x = self._encode(x.reshape(1, *x.shape), None, attention_maps)
        hidden = x[0]
        concepts = make_concepts(hidden[-1:], self.concept_mlp, self.l_C)
        return concepts[0], hidden


class VideoConceptEncoder(_ConceptEncoder):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.max_len = cfg.l_V
        super().__init__(cfg.d_v, cfg.l_V, cfg, rng)

    def forward(self, features: ArrayLike, weights: Optional[np.ndarray] = None,
                attention_maps: Optional[List[np.ndarray]] = None) -> Tensor:
        """
        Encode one video under a batch of anchor weightings

        Args:
            features: (L, d_v) with L <= l_V
            weights: (B, L) anchor densities, or None for a single unweighted pass;
                the CLS key always carries weight 1
            attention_maps: optional sink for per-layer attention probabilities

        Returns:
            Concepts of shape (B, l_C, d_h)
        """
        features = as_tensor(features)
        length = features.shape[0]
        if features.ndim != 2 or length == 0:
            raise InputError(f"video features must be a non-empty matrix, got shape {features.shape}")
        if length > self.max_len:
            raise InputError(f"video has {length} positions, limit is {self.max_len}")

        x = self._embed(features)
        row_weights = None
        if weights is None:
            x = x.reshape(1, *x.shape)
        else:
            weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
            if weights.shape[1] != length:
                raise InputError(f"anchor weights cover {weights.shape[1]} positions, video has {length}")
            row_weights = np.concatenate([weights, np.ones((weights.shape[0], 1))], axis=1)
            x = x.reshape(1, *x.shape) * np.ones((weights.shape[0], 1, 1))

        x = self._encode(x, row_weights, attention_maps)
        return make_concepts(x[:, length, :], self.concept_mlp, self.l_C)


def encode_text(encoder: TextConceptEncoder, query: QueryTokens) -> Tuple[Tensor, Tensor]:
    return encoder(query)


def encode_video(encoder: VideoConceptEncoder, video: FeatureSequence,
                 weights: Optional[np.ndarray] = None) -> Tensor:
    return encoder(video.features, weights)
