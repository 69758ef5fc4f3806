"""Straight-through binary gate"""
from typing import Optional

import numpy as np

from app.nn.tensor import Tensor, _sigmoid, as_tensor


def st_gate(logits, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Binary gate with a sigmoid surrogate gradient

    Forward emits hard 0/1 values: ``logit > 0`` in eval mode, a Bernoulli
    draw with probability sigmoid(logit) in training mode. Backward passes
    the upstream gradient times sigmoid'(logit).

    Args:
        logits: Gate logits (Tensor or array)
        training: Stochastic forward when True
        rng: numpy Generator, required in training mode

    Returns:
        Tensor of 0/1 values shaped like ``logits``
    """
    logits = as_tensor(logits)
    prob = _sigmoid(logits.data)
    if training:
        if rng is None:
            raise ValueError("stochastic gates need an rng")
        hard = (rng.random(prob.shape) < prob).astype(np.float64)
    else:
        hard = (logits.data > 0).astype(np.float64)
    out = Tensor(hard, _parents=(logits,), _op="st_gate")

    def _backward():
        logits._accumulate(out.grad * prob * (1.0 - prob))
    out._backward = _backward
    return out
