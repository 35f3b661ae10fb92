"""
Semantic reconstructor (training only)
Masks content words of the query and reconstructs them from a concept set
"""

import math
from typing import Optional, Sequence

import numpy as np

from cfmr.config import EncoderConfig
from cfmr.exceptions.custom_exceptions import InputError, ValidationError
from cfmr.kernel.layers import DecoderLayer, LayerNorm, Linear, Module, Parameter, xavier_uniform
from cfmr.kernel.tensor import ArrayLike, Tensor, as_tensor
from cfmr.models.domain import GaussianAnchor, MaskedQuery, QueryTokens, ReconLossTriple
from cfmr.services.vocabulary import MASK_ID


def mask_query(query: QueryTokens, ratio: float, rng: np.random.Generator) -> MaskedQuery:
    """Mask ceil(ratio * #content) content positions chosen uniformly; function words stay"""
    if not 0 < ratio <= 1:
        raise ValidationError(f"mask ratio must lie in (0, 1], got {ratio}")
    content = query.content_positions
    if content.size == 0:
        raise InputError('query has no content tokens to mask')

    count = min(content.size, math.ceil(ratio * content.size - 1e-9))
    chosen = np.sort(rng.choice(content, size=count, replace=False))
    mask = np.zeros(len(query), dtype=bool)
    mask[chosen] = True
    ids = query.ids.copy()
    targets = ids[chosen].copy()
    ids[chosen] = MASK_ID
    return MaskedQuery(ids=ids, mask=mask, targets=targets)


class SemanticReconstructor(Module):
    """Transformer decoder Ψ followed by the vocabulary projection f_r"""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.input_proj = Linear(cfg.d_q, cfg.d_h, rng)
        self.positions = Parameter(xavier_uniform(rng, cfg.l_Q, cfg.d_h))
        self.layers = [DecoderLayer(cfg.d_h, cfg.heads, cfg.ff_dim, rng)
                       for _ in range(cfg.decoder_layers)]
        self.final_norm = LayerNorm(cfg.d_h)
        self.vocab_proj = Linear(cfg.d_h, cfg.vocab_size, rng)

    def logits(self, concepts: ArrayLike, word_features: ArrayLike) -> Tensor:
        """
        Args:
            concepts: (l_C, d_h) or (B, l_C, d_h); rows carry no positional encoding
            word_features: (T, d_q) features of the masked query

        Returns:
            Vocabulary logits of shape (B, T, l_W)
        """
        concepts, word_features = as_tensor(concepts), as_tensor(word_features)
        if concepts.ndim == 2:
            concepts = concepts.reshape(1, *concepts.shape)
        tokens = word_features.shape[0]
        x = self.input_proj(word_features) + self.positions[:tokens]
        x = x.reshape(1, *x.shape) * np.ones((concepts.shape[0], 1, 1))
        for layer in self.layers:
            x = layer(x, concepts)
        return self.vocab_proj(self.final_norm(x))

    def forward(self, concepts: ArrayLike, word_features: ArrayLike) -> Tensor:
        """Word probabilities P = softmax(f_r(Ψ(C, F̂_q))), one row per query position"""
        return self.logits(concepts, word_features).softmax(axis=-1)


def reconstruct(concepts: ArrayLike, masked: MaskedQuery, reconstructor: SemanticReconstructor,
                word_table) -> Tensor:
    """Probabilities for a masked query; word_table maps ids to word features"""
    return reconstructor(concepts, word_table(masked.ids))


def masked_nll(log_probs: ArrayLike, masked: MaskedQuery) -> Tensor:
    """
    Negative log-likelihood of the true tokens at masked positions, averaged over them

    Args:
        log_probs: (T, l_W) or (B, T, l_W)

    Returns:
        Scalar for 2-D input, (B,) otherwise
    """
    log_probs = as_tensor(log_probs)
    positions = masked.positions
    if log_probs.ndim == 2:
        return -(log_probs[positions, masked.targets].mean())
    picked = log_probs[:, positions, masked.targets]
    return -(picked.mean(axis=-1))


def reconstruction_loss(P_v: ArrayLike, P_q: ArrayLike, masked: MaskedQuery) -> Tensor:
    """Masked-position NLL under the video-conditioned and text-conditioned predictions"""
    P_v, P_q = as_tensor(P_v), as_tensor(P_q)
    if P_v.shape[-2:] != P_q.shape[-2:]:
        raise ValidationError(f"probability shapes disagree: {P_v.shape} vs {P_q.shape}")
    return masked_nll(P_v.log(), masked).mean() + masked_nll(P_q.log(), masked).mean()


def select_optimal_anchor(anchors: Sequence[GaussianAnchor], losses: Sequence[float]) -> int:
    """Index of the lowest reconstruction loss; ties go to the narrowest anchor"""
    if not anchors or len(anchors) != len(losses):
        raise ValidationError('need one loss per positive anchor and at least one anchor')
    return min(range(len(anchors)), key=lambda i: (float(losses[i]), anchors[i].width, i))


def pcl_loss(triple: ReconLossTriple, alpha1: float, alpha2: float) -> Tensor:
    """
    max(O - N + α1, 0) + max(O - R + α2, 0)

    The negative term is dropped when the sample has no negative anchor. The
    hinge subgradient at the kink is 0.
    """
    if alpha1 < 0 or alpha2 < 0:
        raise ValidationError('pcl margins must be >= 0')
    optimal = as_tensor(triple.optimal)
    loss = (optimal - triple.whole + alpha2).relu()
    if triple.negative is not None:
        loss = (optimal - triple.negative + alpha1).relu() + loss
    return loss


def reconstruction_accuracy(logits: ArrayLike, masked: MaskedQuery) -> float:
    """Fraction of masked positions whose argmax is the true token"""
    data = as_tensor(logits).data
    if data.ndim == 3:
        data = data[0]
    predicted = np.argmax(data[masked.positions], axis=-1)
    return float(np.mean(predicted == masked.targets)) if masked.targets.size else 0.0
