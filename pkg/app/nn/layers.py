from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from app.errors import DimensionError
from app.nn.tensor import Tensor, as_tensor, parameter


class Module:
    """
    Parameter container

    Parameters are Tensor attributes with ``requires_grad``; sub-modules may
    be attributes or lists of modules. Names follow attribute order, so
    checkpoints are stable.
    """

    training: bool = True

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        for name, p in self.named_parameters():
            if name not in state:
                raise DimensionError(f"checkpoint is missing parameter {name}")
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise DimensionError(f"parameter {name}: checkpoint shape {value.shape} != {p.data.shape}")
            p.data = value.copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True):
        self.training = mode
        for value in vars(self).values():
            if isinstance(value, Module):
                value.train(mode)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, zero: bool = False):
        self.in_dim = in_dim
        self.out_dim = out_dim
        if zero:
            weight = np.zeros((in_dim, out_dim))
        else:
            weight = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, out_dim))
        self.weight = parameter(weight)
        self.bias = parameter(np.zeros(out_dim))

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise DimensionError(f"Linear expects last dimension {self.in_dim}, got {x.shape[-1]}")
        return x @ self.weight + self.bias


class Mlp(Module):
    """
    Feed-forward net with SiLU between layers

    Args:
        sizes: [in, hidden..., out]
        rng: numpy Generator for initialisation
        zero_last: Start the output layer at zero (identity-initialised flows)
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, zero_last: bool = False):
        if len(sizes) < 2:
            raise DimensionError("an MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.layers = [
            Linear(a, b, rng, zero=zero_last and i == len(sizes) - 2)
            for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def forward(self, x) -> Tensor:
        h = as_tensor(x)
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = h.silu()
        return h


def mlp_apply(net: Mlp, x) -> Tensor:
    return net(x)
