"""Adam with bias correction, the only optimizer the trainer needs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Gradients, Param

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
LEARNING_RATE = 2e-4


@dataclass
class AdamState:
    """Step count plus per-parameter first/second moment estimates."""

    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    beta1: float = BETA1
    beta2: float = BETA2
    epsilon: float = EPSILON
    learning_rate: float = LEARNING_RATE

    @classmethod
    def for_params(cls, params: dict[str, Param], learning_rate: float = LEARNING_RATE) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
            learning_rate=learning_rate,
        )


def adam_step(params: dict[str, Param], grads: Gradients, state: AdamState):
    """One bias-corrected Adam update, in place; single-writer contract.

    Every parameter must have a gradient; extra gradient entries are a
    caller bug and rejected too.
    """
    missing = [name for name in params if name not in grads]
    if missing:
        raise KeyError(f"missing gradient for parameter(s): {missing}")
    unknown = [name for name in grads if name not in params]
    if unknown:
        raise KeyError(f"gradient for unknown parameter(s): {unknown}")

    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise KeyError(f"gradient shape {g.shape} != param shape {p.data.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state
