"""
Adam Optimizer for RSLab
Bias-corrected moment estimates per named parameter
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from numerics import ParamSet
from utils.errors import DimensionError


@dataclass
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    """First/second moments keyed by parameter name, plus the shared step counter"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(
    params: ParamSet,
    grads: Optional[Mapping[str, np.ndarray]],
    state: AdamState,
    hyper: AdamHyper,
) -> AdamState:
    """One update in place; parameters without a gradient are left untouched

    grads=None reads each tensor's .grad.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - hyper.beta1 ** t
    bc2 = 1.0 - hyper.beta2 ** t
    for name, tensor in params.items():
        g = tensor.grad if grads is None else grads.get(name)
        if g is None:
            continue
        if g.shape != tensor.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter is {tensor.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        m = hyper.beta1 * state.m[name] + (1.0 - hyper.beta1) * g
        v = hyper.beta2 * state.v[name] + (1.0 - hyper.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        m_hat = m / bc1
        v_hat = v / bc2
        tensor.data = tensor.data - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return state


class Adam:
    """Stateful wrapper bound to one ParamSet"""

    def __init__(self, params: ParamSet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.hyper = AdamHyper(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        self.state = AdamState()

    @property
    def lr(self) -> float:
        return self.hyper.lr

    @lr.setter
    def lr(self, value: float):
        self.hyper.lr = value

    def step(self, grads: Optional[Mapping[str, np.ndarray]] = None):
        adam_step(self.params, grads, self.state, self.hyper)

    def zero_grad(self):
        self.params.zero_grad()


def clip_grad_norm(params: ParamSet, max_norm: float) -> float:
    """Scale all .grad arrays so their global L2 norm is at most max_norm; returns the pre-clip norm"""
    grads = [t.grad for _, t in params.items() if t.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if total > max_norm:
        scale = max_norm / total
        for _, tensor in params.items():
            if tensor.grad is not None:
                tensor.grad = tensor.grad * scale
    return total
