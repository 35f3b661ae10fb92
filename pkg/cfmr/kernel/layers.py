"""
Neural layers with named parameters
"""

import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from cfmr.exceptions.custom_exceptions import ConfigurationError, DimensionError
from cfmr.kernel import functional as F
from cfmr.kernel.tensor import ArrayLike, Tensor, as_tensor


class Parameter(Tensor):
    """Trainable leaf tensor; its gradient accumulator starts at zero"""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Module:
    """Container that discovers parameters from its attributes, in definition order"""

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self) -> Iterator[Tuple[str, object]]:
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = '') -> List[Tuple[str, Parameter]]:
        named = []
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                named.append((full, value))
            else:
                named.extend(value.named_parameters(prefix=f"{full}."))
        return named

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if name not in state:
                raise DimensionError(f"missing parameter '{name}'")
            value = np.asarray(state[name], dtype=p.data.dtype)
            if value.shape != p.shape:
                raise DimensionError(
                    f"parameter '{name}' has shape {value.shape}, expected {p.shape}"
                )
            p.data = value.copy()
            p.zero_grad()


class Linear(Module):
    """Affine projection; weights are (in, out)"""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.weight = Parameter(xavier_uniform(rng, in_dim, out_dim))
        self.bias = Parameter(np.zeros(out_dim))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: ArrayLike) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: ArrayLike) -> Tensor:
        x = as_tensor(x)
        centered = x - x.mean(axis=-1, keepdims=True)
        variance = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (variance + self.eps).sqrt() * self.gamma + self.beta


class Embedding(Module):
    """Lookup table indexed by integer ids"""

    def __init__(self, count: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(xavier_uniform(rng, count, dim))

    def forward(self, ids) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.weight.shape[0]):
            raise DimensionError(f"id out of range for table of size {self.weight.shape[0]}")
        return self.weight[ids]


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if heads < 1 or dim % heads != 0:
            raise ConfigurationError(f"model dim {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.output = Linear(dim, dim, rng)

    def forward(self, x: Tensor, context: Optional[Tensor] = None,
                row_weights: Optional[ArrayLike] = None,
                attention_maps: Optional[List[np.ndarray]] = None) -> Tensor:
        context = x if context is None else context
        attended = F.multihead_attention(
            self.query(x), self.key(context), self.value(context),
            heads=self.heads, row_weights=row_weights, attention_maps=attention_maps
        )
        return self.output(attended)


class MLP(Module):
    """Two-layer perceptron with ReLU"""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int, rng: np.random.Generator):
        self.hidden = Linear(in_dim, hidden_dim, rng)
        self.out = Linear(hidden_dim, out_dim, rng)

    def forward(self, x: ArrayLike) -> Tensor:
        return self.out(self.hidden(x).relu())


class EncoderLayer(Module):
    """Pre-norm transformer encoder block"""

    def __init__(self, dim: int, heads: int, ff_dim: int, rng: np.random.Generator):
        self.attn_norm = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.ff_norm = LayerNorm(dim)
        self.ff = MLP(dim, ff_dim, dim, rng)

    def forward(self, x: Tensor, row_weights: Optional[ArrayLike] = None,
                attention_maps: Optional[List[np.ndarray]] = None) -> Tensor:
        x = x + self.attn(self.attn_norm(x), row_weights=row_weights,
                          attention_maps=attention_maps)
        return x + self.ff(self.ff_norm(x))


class DecoderLayer(Module):
    """Pre-norm decoder block: bidirectional self-attention, then cross-attention"""

    def __init__(self, dim: int, heads: int, ff_dim: int, rng: np.random.Generator):
        self.self_norm = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, heads, rng)
        self.cross_norm = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads, rng)
        self.ff_norm = LayerNorm(dim)
        self.ff = MLP(dim, ff_dim, dim, rng)

    def forward(self, x: Tensor, memory: Tensor) -> Tensor:
        x = x + self.self_attn(self.self_norm(x))
        x = x + self.cross_attn(self.cross_norm(x), context=memory)
        return x + self.ff(self.ff_norm(x))
