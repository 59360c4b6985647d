"""Adam optimizer over Mlp parameters, honoring per-layer freezing."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, TrainingError
from .mlp import Gradients, Mlp


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)


def init_adam(model: Mlp, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for layer in model.layers:
        state.m_w.append(np.zeros_like(layer.weights))
        state.v_w.append(np.zeros_like(layer.weights))
        state.m_b.append(np.zeros_like(layer.biases))
        state.v_b.append(np.zeros_like(layer.biases))
    return state


def adam_step(model: Mlp, grads: Gradients, state: AdamState) -> None:
    """One Adam update in place; frozen layers keep parameters and moments."""
    if len(grads.weights) != len(model.layers):
        raise ShapeError("gradient layer count does not match the model")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for k, layer in enumerate(model.layers):
        if model.frozen[k]:
            continue
        gw, gb = grads.weights[k], grads.biases[k]
        if gw.shape != layer.weights.shape or gb.shape != layer.biases.shape:
            raise ShapeError(f"gradient shape mismatch at layer {k}")
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise TrainingError(f"non-finite gradient at layer {k} (step {t})")
        state.m_w[k] = state.beta1 * state.m_w[k] + (1 - state.beta1) * gw
        state.v_w[k] = state.beta2 * state.v_w[k] + (1 - state.beta2) * gw * gw
        state.m_b[k] = state.beta1 * state.m_b[k] + (1 - state.beta1) * gb
        state.v_b[k] = state.beta2 * state.v_b[k] + (1 - state.beta2) * gb * gb
        layer.weights -= state.lr * (state.m_w[k] / bc1) / (
            np.sqrt(state.v_w[k] / bc2) + state.eps
        )
        layer.biases -= state.lr * (state.m_b[k] / bc1) / (
            np.sqrt(state.v_b[k] / bc2) + state.eps
        )
    model.version += 1
