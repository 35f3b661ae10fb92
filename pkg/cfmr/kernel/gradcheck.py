"""
Finite-difference gradient checking
"""

from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from cfmr.kernel.layers import Parameter
from cfmr.kernel.tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max absolute difference scaled by the larger gradient magnitude"""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def numerical_gradient(loss_fn: Callable[[], Tensor], param: Parameter, h: float = 1e-4) -> np.ndarray:
    """Central differences of loss_fn with respect to every entry of param"""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = loss_fn().item()
        flat[i] = original - h
        minus = loss_fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def check_gradients(
        loss_fn: Callable[[], Tensor],
        named_params: Sequence[Tuple[str, Parameter]],
        h: float = 1e-4
) -> Dict[str, float]:
    """
    Compare backward() against central differences

    Returns:
        Relative error per parameter name
    """
    for _, p in named_params:
        p.zero_grad()
    loss_fn().backward()
    analytic = {name: p.grad.copy() for name, p in named_params}

    errors = {}
    for name, p in named_params:
        errors[name] = relative_error(analytic[name], numerical_gradient(loss_fn, p, h))
    return errors
