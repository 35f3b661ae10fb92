"""
Stateless tensor operations shared by the layers
"""

import math
from typing import List, Optional

import numpy as np

from cfmr.exceptions.custom_exceptions import ConfigurationError, DimensionError
from cfmr.kernel.tensor import ArrayLike, Tensor, as_tensor


def linear(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None) -> Tensor:
    """x·W + b with b broadcast over rows"""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"input dim {x.shape[-1]} does not match weight input dim {weight.shape[0]}"
        )
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


def softmax_rows(x: ArrayLike) -> Tensor:
    """Row-wise softmax (max-subtracted)"""
    return as_tensor(x).softmax(axis=-1)


def relu(x: ArrayLike) -> Tensor:
    return as_tensor(x).relu()


def _split_heads(x: Tensor, heads: int) -> Tensor:
    batch, tokens, dim = x.shape
    return x.reshape(batch, tokens, heads, dim // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: Tensor) -> Tensor:
    batch, heads, tokens, head_dim = x.shape
    return x.transpose(0, 2, 1, 3).reshape(batch, tokens, heads * head_dim)


def multihead_attention(
        q: ArrayLike,
        k: ArrayLike,
        v: ArrayLike,
        heads: int,
        row_weights: Optional[ArrayLike] = None,
        attention_maps: Optional[List[np.ndarray]] = None
) -> Tensor:
    """
    Scaled dot-product attention split over heads

    Args:
        q, k, v: (tokens, dim) or (batch, tokens, dim), already projected
        heads: number of heads; dim must be divisible by it
        row_weights: (keys,) or (batch, keys); every post-softmax attention row
            is multiplied element-wise by it and renormalized to sum 1
        attention_maps: when given, the (batch, heads, queries, keys) attention
            probabilities are appended to it

    Returns:
        Attention output with the shape of q
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    squeeze = q.ndim == 2
    if squeeze:
        q = q.reshape(1, *q.shape)
        k = k.reshape(1, *k.shape)
        v = v.reshape(1, *v.shape)

    dim = q.shape[-1]
    if heads < 1 or dim % heads != 0:
        raise ConfigurationError(f"model dim {dim} is not divisible by {heads} heads")
    if k.shape[-1] != dim or v.shape[-1] != dim or k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"incompatible q/k/v shapes {q.shape}, {k.shape}, {v.shape}")

    qh, kh, vh = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scores = (qh @ kh.swapaxes(-1, -2)) * (1.0 / math.sqrt(dim // heads))
    probs = scores.softmax(axis=-1)

    if row_weights is not None:
        weights = np.asarray(as_tensor(row_weights).data)
        keys = k.shape[-2]
        if weights.shape[-1] != keys:
            raise DimensionError(f"row_weights length {weights.shape[-1]} != key count {keys}")
        weights = weights.reshape(-1, 1, 1, keys)
        probs = probs * weights
        probs = probs / probs.sum(axis=-1, keepdims=True)

    if attention_maps is not None:
        attention_maps.append(probs.data.copy())

    out = _merge_heads(probs @ vh)
    if squeeze:
        out = out.reshape(out.shape[1], out.shape[2])
    return out
