"""
Adam optimizer
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from cfmr.kernel.layers import Parameter


@dataclass
class AdamState:
    """Moment buffers (one per parameter, same shapes) and hyperparameters"""
    learning_rate: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moments: List[np.ndarray] = field(default_factory=list)
    second_moments: List[np.ndarray] = field(default_factory=list)


class Adam:
    def __init__(self, params: Sequence[Parameter], learning_rate: float = 4e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
            first_moments=[np.zeros_like(p.data) for p in self.params],
            second_moments=[np.zeros_like(p.data) for p in self.params],
        )

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def adam_step(params: Sequence[Parameter], state: AdamState) -> None:
    """One bias-corrected Adam update; gradients are cleared afterward"""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step

    for p, m, v in zip(params, state.first_moments, state.second_moments):
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        p.data -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        p.zero_grad()
