"""
Gated per-latent transition prior

For every latent i a small net maps (z_prev, b_i) to the mean shift and
log-std of z_next[i]. The action reaches latent i only through its binary
gate b_i, which a gate net computes from (action vector, z_prev).
"""
from typing import Optional, Tuple

import numpy as np

from app.nn import Mlp, Module, Tensor, as_tensor, concat, einsum, gaussian_nll, parameter, st_gate

LOG_STD_BOUND = 5.0


class TransitionModel(Module):
    def __init__(self, latent_dim: int, action_dim: int, hidden: int, gate_hidden: int, rng: np.random.Generator):
        M, H = latent_dim, hidden
        self.latent_dim = M
        self.action_dim = action_dim
        self.w_in = parameter(rng.normal(0.0, 1.0 / np.sqrt(M + 1), size=(M, M, H)))
        self.w_gate = parameter(rng.normal(0.0, 1.0 / np.sqrt(M + 1), size=(M, H)))
        self.b_in = parameter(np.zeros((M, H)))
        self.w_out = parameter(np.zeros((M, H, 2)))
        self.b_out = parameter(np.zeros((M, 2)))
        self.gate_net = Mlp([action_dim + M, gate_hidden, M], rng)

    def gate_logits(self, action, z_prev) -> Tensor:
        action, z_prev = as_tensor(action), as_tensor(z_prev)
        return self.gate_net(concat([action, z_prev], axis=-1))

    def gates(self, action, z_prev, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        return st_gate(self.gate_logits(action, z_prev), training, rng)

    def conditional(self, z_prev, gates) -> Tuple[Tensor, Tensor]:
        """
        Per-latent Gaussian parameters

        Args:
            z_prev: (B, M) previous latents
            gates: (B, M) binary interaction gates

        Returns:
            (mean, log_std), each (B, M); mean = z_prev + predicted shift
        """
        z_prev, gates = as_tensor(z_prev), as_tensor(gates)
        B, M = z_prev.shape
        h = einsum("bj,jih->bih", z_prev, self.w_in)
        h = (h + gates.reshape(B, M, 1) * self.w_gate + self.b_in).silu()
        out = einsum("bih,iho->bio", h, self.w_out) + self.b_out
        mean = z_prev + out[:, :, 0]
        log_std = (out[:, :, 1] * (1.0 / LOG_STD_BOUND)).tanh() * LOG_STD_BOUND
        return mean, log_std


def interaction_gates(
    transition: TransitionModel,
    action,
    z_prev,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Binary M-vector(s) b; deterministic unless ``training``"""
    action = np.atleast_2d(np.asarray(action if not isinstance(action, Tensor) else action.data))
    z_prev = np.atleast_2d(np.asarray(z_prev if not isinstance(z_prev, Tensor) else z_prev.data))
    return transition.gates(action, z_prev, training, rng).data


def transition_loglik(transition: TransitionModel, z_next, z_prev, gates) -> np.ndarray:
    """Sum over latents of log N(z_next_i; mean_i, std_i); one value per batch row"""
    z_next = np.atleast_2d(np.asarray(z_next, dtype=np.float64))
    z_prev = np.atleast_2d(np.asarray(z_prev, dtype=np.float64))
    gates = np.atleast_2d(np.asarray(gates, dtype=np.float64))
    mean, log_std = transition.conditional(z_prev, gates)
    return -gaussian_nll(z_next, mean.data, log_std.data)
