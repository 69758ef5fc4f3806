"""
Change-of-variables training objective

With a deterministic encoder and an invertible flow the sequence likelihood
is exact:

    -log p(E_next | E_prev, action) = -log p(z_next | z_prev, b) - log|det J_f(E_next)|

so no sampling is needed. The z_0 prior is dropped (pairs of length 2).
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.crl.model import CwmParams
from app.data.records import Trajectory
from app.errors import DimensionError, EmptyDataset
from app.nn import Tensor, as_tensor, gaussian_nll, st_gate
from app.observation import ObservationMap


@dataclass
class TransitionSet:
    """Consecutive (E_prev, action, E_next) pairs with their ground-truth causal vectors"""
    E_prev: np.ndarray
    E_next: np.ndarray
    tokens: np.ndarray
    coords: np.ndarray
    causal_prev: np.ndarray
    causal_next: np.ndarray

    def __len__(self) -> int:
        return len(self.E_prev)

    def subset(self, idx) -> "TransitionSet":
        idx = np.asarray(idx, dtype=np.int64)
        return TransitionSet(
            self.E_prev[idx], self.E_next[idx], self.tokens[idx],
            self.coords[idx], self.causal_prev[idx], self.causal_next[idx],
        )

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory], obs_map: ObservationMap) -> "TransitionSet":
        steps = [step for trajectory in trajectories for step in trajectory.steps]
        if not steps:
            raise EmptyDataset("no transitions in the given trajectories")
        obs = np.stack([s.observation for s in steps])
        next_obs = np.stack([s.next_observation for s in steps])
        return cls(
            E_prev=obs_map.encode(obs),
            E_next=obs_map.encode(next_obs),
            tokens=np.stack([s.action_tokens.as_array() for s in steps]),
            coords=np.stack([s.action_coords for s in steps]),
            causal_prev=np.stack([s.pre_state_causal for s in steps]),
            causal_next=np.stack([s.post_state_causal for s in steps]),
        )


def subsample_transitions(dataset: TransitionSet, fraction: float, rng: np.random.Generator) -> TransitionSet:
    """Random subset of ``round(fraction * n)`` transitions (at least one)"""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return dataset
    count = max(1, int(round(fraction * len(dataset))))
    return dataset.subset(np.sort(rng.choice(len(dataset), size=count, replace=False)))


def cwm_loss(
    params: CwmParams,
    batch: TransitionSet,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    gate_penalty: Optional[float] = None,
    force_gates: Optional[np.ndarray] = None,
) -> Tuple[Tensor, Dict[str, float]]:
    """
    Batch-mean negative log-likelihood of E_next given (E_prev, action)

    Both encoder outputs go through the flow in one pass. ``gate_penalty``
    (default from the train config) adds an L1 term on gate activation
    probabilities; ``force_gates`` replaces the gate net output and drops
    that term.

    Returns:
        (loss Tensor, stats with "nll", "logdet", "gate_rate")

    Raises:
        EmptyDataset: empty batch
        DimensionError: encoder outputs do not match M
    """
    B = len(batch)
    if B == 0:
        raise EmptyDataset("cwm_loss needs a nonempty batch")
    M = params.M
    if batch.E_prev.shape != (B, M) or batch.E_next.shape != (B, M):
        raise DimensionError(f"encoder outputs {batch.E_prev.shape}/{batch.E_next.shape} do not match (B, {M})")
    penalty = params.config.gate_penalty if gate_penalty is None else gate_penalty

    z_all, logdet_all = params.flow(np.concatenate([batch.E_prev, batch.E_next], axis=0))
    z_prev, z_next = z_all[:B], z_all[B:]
    logdet_next = logdet_all[B:]

    action = params.embedder(batch.tokens, batch.coords)
    logits = params.transition.gate_logits(action, z_prev)
    if force_gates is not None:
        gates = as_tensor(np.broadcast_to(np.asarray(force_gates, dtype=np.float64), (B, M)).copy())
    else:
        gates = st_gate(logits, training, rng)
    mean, log_std = params.transition.conditional(z_prev, gates)
    nll = gaussian_nll(z_next, mean, log_std)

    likelihood = (nll - logdet_next).mean()
    loss = likelihood
    gate_prob = logits.sigmoid().mean()
    if penalty and force_gates is None:
        loss = loss + gate_prob * penalty
    stats = {
        "nll": likelihood.item(),
        "logdet": float(logdet_next.data.mean()),
        "gate_rate": float(gates.data.mean()),
        "gate_prob": gate_prob.item(),
    }
    return loss, stats


def evaluate_loss(params: CwmParams, dataset: TransitionSet, batch_size: int = 1024) -> float:
    """Deterministic (eval-mode gates) mean likelihood term over a dataset"""
    if len(dataset) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    total = 0.0
    for start in range(0, len(dataset), batch_size):
        batch = dataset.subset(np.arange(start, min(start + batch_size, len(dataset))))
        _, stats = cwm_loss(params, batch, gate_penalty=0.0)
        total += stats["nll"] * len(batch)
    return total / len(dataset)

