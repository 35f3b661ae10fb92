"""Dense numeric kernel: tensors with reverse-mode gradients, layers and Adam."""

from cfmr.kernel.tensor import Tensor, concat, stack, no_grad, is_grad_enabled
from cfmr.kernel.layers import (
    Parameter, Module, Linear, LayerNorm, Embedding, MultiHeadAttention, MLP,
    EncoderLayer, DecoderLayer,
)
from cfmr.kernel.optim import Adam, AdamState, adam_step

__all__ = [
    'Tensor', 'concat', 'stack', 'no_grad', 'is_grad_enabled',
    'Parameter', 'Module', 'Linear', 'LayerNorm', 'Embedding', 'MultiHeadAttention',
    'MLP', 'EncoderLayer', 'DecoderLayer', 'Adam', 'AdamState', 'adam_step',
]
