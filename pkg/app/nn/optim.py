"""Adam with linear warmup and per-group learning rates"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.errors import DimensionError
from app.nn.tensor import Tensor


@dataclass
class ParamGroup:
    params: List[Tensor]
    lr: float


@dataclass
class OptimizerState:
    """First/second moments keyed by parameter identity, plus the step count"""
    step: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict)
    v: Dict[int, np.ndarray] = field(default_factory=dict)


class Adam:
    """
    Adam(params, lr) or Adam([ParamGroup(...), ...])

    The effective learning rate at step t (1-based) is
    ``lr * min(1, t / warmup_steps)``; ``warmup_steps=0`` disables warmup.
    """

    def __init__(
        self,
        params,
        lr: float = 3e-3,
        warmup_steps: int = 0,
        betas=(0.9, 0.999),
        eps: float = 1e-8,
    ):
        params = list(params)
        if params and isinstance(params[0], ParamGroup):
            self.groups = params
        else:
            self.groups = [ParamGroup(params, lr)]
        self.warmup_steps = warmup_steps
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = OptimizerState()

    @property
    def params(self) -> List[Tensor]:
        return [p for group in self.groups for p in group.params]

    def warmup_factor(self, step: int) -> float:
        if self.warmup_steps <= 0:
            return 1.0
        return min(1.0, step / self.warmup_steps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, grads: Optional[Sequence[np.ndarray]] = None):
        """
        Apply one update

        Args:
            grads: Gradients aligned with ``self.params``; defaults to each
                parameter's accumulated ``.grad`` (missing grads count as zero)
        """
        params = self.params
        if grads is not None and len(grads) != len(params):
            raise DimensionError(f"got {len(grads)} gradients for {len(params)} parameters")
        self.state.step += 1
        t = self.state.step
        scale = self.warmup_factor(t)
        bias1 = 1.0 - self.beta1 ** t
        bias2 = 1.0 - self.beta2 ** t

        index = 0
        for group in self.groups:
            lr = group.lr * scale
            for p in group.params:
                g = grads[index] if grads is not None else p.grad
                index += 1
                g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
                if g.shape != p.data.shape:
                    raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
                key = id(p)
                m = self.state.m.get(key, np.zeros_like(p.data))
                v = self.state.v.get(key, np.zeros_like(p.data))
                m = self.beta1 * m + (1.0 - self.beta1) * g
                v = self.beta2 * v + (1.0 - self.beta2) * g * g
                self.state.m[key] = m
                self.state.v[key] = v
                p.data = p.data - lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def optimizer_step(optimizer: Adam, params: Sequence[Tensor], grads: Sequence[np.ndarray]) -> List[Tensor]:
    """Functional form: update ``params`` (which must be the optimizer's) and return them"""
    if [id(p) for p in params] != [id(p) for p in optimizer.params]:
        raise DimensionError("parameters do not match the optimizer's parameter list")
    optimizer.step(grads)
    return list(params)
