"""Adam with bias correction and decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .engine import Tensor


@dataclass
class AdamState:
    """Optimizer state for a fixed, ordered parameter list.

    Moment arrays are kept positionally parallel to the parameter list the
    state was built for; ``step_count`` advances by exactly one per call to
    :func:`adam_step`.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], **kwargs) -> "AdamState":
        state = cls(**kwargs)
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params: list[Tensor], state: AdamState) -> None:
    """One in-place update; gradients are consumed (cleared to None).

    Weight decay is decoupled from the moment estimates: the decay term
    ``lr * wd * p`` is subtracted directly and never enters m/v.
    """
    if len(state.first_moment) != len(params):
        raise ContractError(
            f"optimizer state built for {len(state.first_moment)} params, got {len(params)}")
    for i, p in enumerate(params):
        if p.grad is None:
            label = p.name if p.name is not None else f"#{i}"
            raise ContractError(f"parameter {label} has no gradient; run backward first")
        if p.grad.shape != p.data.shape:
            raise ContractError(f"parameter {p.name or i}: grad shape {p.grad.shape} "
                                f"!= value shape {p.data.shape}")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for i, p in enumerate(params):
        g = p.grad
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        p.data -= state.learning_rate * update
        if state.weight_decay:
            p.data -= state.learning_rate * state.weight_decay * p.data
        p.grad = None
