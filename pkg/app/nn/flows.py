"""
Invertible flows with exact log-determinants

``CouplingFlow`` stacks an optional LU-parameterised linear layer and affine
coupling layers with alternating even/odd masks. Forward passes run on the
tape (training); inverses are plain numpy.
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from app.errors import DimensionError
from app.nn.layers import Mlp, Module
from app.nn.tensor import Tensor, as_tensor, parameter

logger = logging.getLogger(__name__)


def alternating_mask(dim: int, parity: int) -> np.ndarray:
    """1.0 on indices with ``i % 2 == parity`` (those pass through unchanged)"""
    return (np.arange(dim) % 2 == parity).astype(np.float64)


class AffineCoupling(Module):
    """
    y = x * exp(s) + t on the unmasked half, identity on the masked half

    s = tanh(scale_net(x * mask)) * (1 - mask), t = shift_net(x * mask) * (1 - mask)
    """

    def __init__(self, dim: int, hidden: int, mask: np.ndarray, rng: np.random.Generator):
        self.dim = dim
        self.mask = np.asarray(mask, dtype=np.float64)
        self.scale_net = Mlp([dim, hidden, hidden, dim], rng, zero_last=True)
        self.shift_net = Mlp([dim, hidden, hidden, dim], rng, zero_last=True)

    def _scale_shift(self, x_masked):
        s = self.scale_net(x_masked).tanh() * (1.0 - self.mask)
        t = self.shift_net(x_masked) * (1.0 - self.mask)
        return s, t

    def forward(self, x) -> Tuple[Tensor, Tensor]:
        x = as_tensor(x)
        s, t = self._scale_shift(x * self.mask)
        y = x * s.exp() + t
        return y, s.sum(axis=-1)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        s, t = self._scale_shift(Tensor(y * self.mask))
        return (y - t.data) * np.exp(-s.data)


class InvertibleLinear(Module):
    """
    y = x @ W.T + b with W = L U

    L is unit lower-triangular, U upper-triangular with a positive diagonal
    exp(log_diag); log|det W| = sum(log_diag). Starts at the identity.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.lower = parameter(np.zeros((dim, dim)))
        self.upper = parameter(np.zeros((dim, dim)))
        self.log_diag = parameter(np.zeros(dim))
        self.bias = parameter(np.zeros(dim))
        self._lower_mask = np.tril(np.ones((dim, dim)), -1)
        self._upper_mask = np.triu(np.ones((dim, dim)), 1)

    def weight(self) -> Tensor:
        eye = np.eye(self.dim)
        L = self.lower * self._lower_mask + eye
        U = self.upper * self._upper_mask + self.log_diag.exp() * eye
        return L @ U

    def forward(self, x) -> Tuple[Tensor, Tensor]:
        x = as_tensor(x)
        y = x @ self.weight().T + self.bias
        return y, self.log_diag.sum()

    def inverse(self, y: np.ndarray) -> np.ndarray:
        eye = np.eye(self.dim)
        L = self.lower.data * self._lower_mask + eye
        U = self.upper.data * self._upper_mask + np.exp(self.log_diag.data) * eye
        rhs = (np.atleast_2d(y) - self.bias.data).T
        x = solve_triangular(U, solve_triangular(L, rhs, lower=True, unit_diagonal=True), lower=False).T
        return x.reshape(np.shape(y))


class CouplingFlow(Module):
    def __init__(self, dim: int, n_layers: int, hidden: int, rng: np.random.Generator, linear: bool = True):
        self.dim = dim
        self.layers: List[Module] = []
        if linear:
            self.layers.append(InvertibleLinear(dim))
        for k in range(n_layers):
            self.layers.append(AffineCoupling(dim, hidden, alternating_mask(dim, k % 2), rng))

    def forward(self, x) -> Tuple[Tensor, Tensor]:
        """
        Map E to z on the tape

        Returns:
            (z, logdet) with logdet shaped like the batch dimensions of x
        """
        x = as_tensor(x)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"flow expects dimension {self.dim}, got {x.shape[-1]}")
        logdet = Tensor(np.zeros(x.shape[:-1]))
        for layer in self.layers:
            x, layer_logdet = layer(x)
            logdet = logdet + layer_logdet
        return x, logdet

    def inverse(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.dim:
            raise DimensionError(f"flow expects dimension {self.dim}, got {z.shape[-1]}")
        for layer in reversed(self.layers):
            z = layer.inverse(z)
        return z


def flow_forward(flow: CouplingFlow, E) -> Tuple[np.ndarray, np.ndarray]:
    """z = f(E) and log|det J| without keeping the tape"""
    z, logdet = flow(np.asarray(E, dtype=np.float64))
    return z.data, logdet.data


def flow_inverse(flow: CouplingFlow, z) -> np.ndarray:
    return flow.inverse(z)
