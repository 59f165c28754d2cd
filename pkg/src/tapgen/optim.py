"""Adam with bias correction over named parameters."""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter


@dataclass
class AdamState:
    """First/second moment estimates keyed by parameter name."""

    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: list[Parameter], state: AdamState, lr: float) -> None:
    """One in-place update from the gradients currently on ``params``."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m.setdefault(p.name, np.zeros_like(p.data))
        v = state.v.setdefault(p.name, np.zeros_like(p.data))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def zero_grads(params: list[Parameter]) -> None:
    for p in params:
        p.grad = None
