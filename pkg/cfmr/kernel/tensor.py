"""
Reverse-mode automatic differentiation over numpy arrays

Every operation is a Function subclass: forward works on raw arrays and stores
what backward needs on the context object; Tensor.backward walks the recorded
graph in reverse topological order and accumulates gradients into leaves.
"""

import threading
from contextlib import contextmanager
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from cfmr.exceptions.custom_exceptions import DimensionError, UsageError

DTYPE = np.float64

_grad_state = threading.local()

ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence[float]]


def is_grad_enabled() -> bool:
    return getattr(_grad_state, 'enabled', True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current thread"""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


def as_tensor(value: ArrayLike) -> 'Tensor':
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=DTYPE))


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Function:
    """One recorded operation in the graph"""

    def __init__(self, *parents: 'Tensor'):
        self.parents = parents

    def forward(self, *args, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: ArrayLike, **kwargs) -> 'Tensor':
        tensors = tuple(as_tensor(t) for t in inputs)
        ctx = cls(*tensors)
        out = ctx.forward(*[t.data for t in tensors], **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, _ctx=ctx if requires_grad else None)


class Tensor:
    """Dense float64 array with an optional gradient and producing Function"""

    __slots__ = ('data', 'grad', 'requires_grad', '_ctx', 'name')
    # ndarray <op> Tensor falls through to the reflected Tensor operator
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False,
                 _ctx: Optional[Function] = None, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._ctx = _ctx
        self.name = name

    def __repr__(self):
        label = f", name={self.name}" if self.name else ''
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> 'Tensor':
        return self.swapaxes(-1, -2)

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    # arithmetic
    def __add__(self, other: ArrayLike) -> 'Tensor':
        return Add.apply(self, other)

    def __radd__(self, other: ArrayLike) -> 'Tensor':
        return Add.apply(other, self)

    def __sub__(self, other: ArrayLike) -> 'Tensor':
        return Add.apply(self, Neg.apply(other))

    def __rsub__(self, other: ArrayLike) -> 'Tensor':
        return Add.apply(other, Neg.apply(self))

    def __mul__(self, other: ArrayLike) -> 'Tensor':
        return Mul.apply(self, other)

    def __rmul__(self, other: ArrayLike) -> 'Tensor':
        return Mul.apply(other, self)

    def __truediv__(self, other: ArrayLike) -> 'Tensor':
        return Div.apply(self, other)

    def __rtruediv__(self, other: ArrayLike) -> 'Tensor':
        return Div.apply(other, self)

    def __neg__(self) -> 'Tensor':
        return Neg.apply(self)

    def __pow__(self, exponent: float) -> 'Tensor':
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other: ArrayLike) -> 'Tensor':
        return MatMul.apply(self, other)

    def __getitem__(self, index) -> 'Tensor':
        return Index.apply(self, index=index)

    # reductions and shape
    def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.data.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def reshape(self, *shape) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes) -> 'Tensor':
        return Transpose.apply(self, axes=tuple(axes))

    def swapaxes(self, a: int, b: int) -> 'Tensor':
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return Transpose.apply(self, axes=tuple(axes))

    # elementwise
    def relu(self) -> 'Tensor':
        return ReLU.apply(self)

    def exp(self) -> 'Tensor':
        return Exp.apply(self)

    def log(self) -> 'Tensor':
        return Log.apply(self)

    def sqrt(self) -> 'Tensor':
        return Sqrt.apply(self)

    def softmax(self, axis: int = -1) -> 'Tensor':
        return Softmax.apply(self, axis=axis)

    def log_softmax(self, axis: int = -1) -> 'Tensor':
        return LogSoftmax.apply(self, axis=axis)

    # autograd
    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires grad"""
        if not self.requires_grad:
            raise UsageError('backward called on a tensor with no recorded forward graph')
        if self.data.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {self.shape}")

        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._ctx is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._ctx.parents, node._ctx.backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def _topological_order(root: Tensor) -> List[Tensor]:
    """Reverse topological order, iterative so deep graphs do not hit the recursion limit"""
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    order.reverse()
    return order


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        t = as_tensor(t)
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else len(shape) + axis + 1, 1)
        expanded.append(t.reshape(tuple(shape)))
    return concat(expanded, axis=axis)


# ==================== OPERATIONS ====================

class Add(Function):
    def forward(self, x, y):
        return x + y

    def backward(self, grad):
        x, y = self.parents
        return unbroadcast(grad, x.shape), unbroadcast(grad, y.shape)


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Mul(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return (unbroadcast(grad * self.y, self.x.shape),
                unbroadcast(grad * self.x, self.y.shape))


class Div(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x / y

    def backward(self, grad):
        return (unbroadcast(grad / self.y, self.x.shape),
                unbroadcast(-grad * self.x / (self.y * self.y), self.y.shape))


class Pow(Function):
    def forward(self, x, exponent):
        self.x, self.exponent = x, exponent
        return x ** exponent

    def backward(self, grad):
        return (grad * self.exponent * self.x ** (self.exponent - 1.0),)


class MatMul(Function):
    def forward(self, x, y):
        if x.ndim < 2 or y.ndim < 2 or x.shape[-1] != y.shape[-2]:
            raise DimensionError(f"cannot multiply shapes {x.shape} and {y.shape}")
        self.x, self.y = x, y
        return x @ y

    def backward(self, grad):
        gx = grad @ np.swapaxes(self.y, -1, -2)
        gy = np.swapaxes(self.x, -1, -2) @ grad
        return unbroadcast(gx, self.x.shape), unbroadcast(gy, self.y.shape)


class Sum(Function):
    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Reshape(Function):
    def forward(self, x, shape):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, x, axes):
        self.axes = axes
        return np.transpose(x, axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class Index(Function):
    def forward(self, x, index):
        self.shape, self.index = x.shape, index
        return x[index]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=DTYPE)
        np.add.at(full, self.index, grad)
        return (full,)


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return x * self.mask

    def backward(self, grad):
        return (grad * self.mask,)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Sqrt(Function):
    def forward(self, x):
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad):
        return (grad * 0.5 / self.out,)


class Softmax(Function):
    def forward(self, x, axis):
        shifted = np.exp(x - np.max(x, axis=axis, keepdims=True))
        self.out = shifted / np.sum(shifted, axis=axis, keepdims=True)
        self.axis = axis
        return self.out

    def backward(self, grad):
        inner = np.sum(grad * self.out, axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class LogSoftmax(Function):
    def forward(self, x, axis):
        shifted = x - np.max(x, axis=axis, keepdims=True)
        log_norm = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
        out = shifted - log_norm
        self.probs = np.exp(out)
        self.axis = axis
        return out

    def backward(self, grad):
        return (grad - self.probs * np.sum(grad, axis=self.axis, keepdims=True),)


class Concat(Function):
    def forward(self, *arrays, axis):
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))
