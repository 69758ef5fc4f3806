"""Central finite-difference checks for taped gradients"""
import logging
from typing import Callable, Sequence

import numpy as np

from app.nn.tensor import Tensor

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
REL_FLOOR = 1e-3


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def grad_check(fn: Callable[[Tensor], Tensor], point) -> float:
    """
    Compare the taped gradient of a scalar function with central differences

    Args:
        fn: Maps a Tensor to a scalar Tensor
        point: Evaluation point (array)

    Returns:
        Max relative error over coordinates
    """
    point = np.array(point, dtype=np.float64)
    x = Tensor(point.copy(), requires_grad=True)
    fn(x).backward()
    analytic = np.zeros_like(point) if x.grad is None else x.grad

    worst = 0.0
    for idx in np.ndindex(point.shape):
        plus, minus = point.copy(), point.copy()
        plus[idx] += FD_STEP
        minus[idx] -= FD_STEP
        numeric = (fn(Tensor(plus)).item() - fn(Tensor(minus)).item()) / (2 * FD_STEP)
        worst = max(worst, _relative_error(float(analytic[idx]), numeric))
    return worst


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    n_coords: int,
    rng: np.random.Generator,
) -> float:
    """
    Finite-difference check of parameter gradients on a sampled coordinate subset

    ``loss_fn`` is re-evaluated with parameters perturbed in place, so it
    must be deterministic (eval-mode gates).
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for _ in range(n_coords):
        k = int(rng.integers(len(params)))
        p = params[k]
        idx = tuple(int(rng.integers(n)) for n in p.data.shape)
        original = p.data[idx]
        p.data[idx] = original + FD_STEP
        up = loss_fn().item()
        p.data[idx] = original - FD_STEP
        down = loss_fn().item()
        p.data[idx] = original
        numeric = (up - down) / (2 * FD_STEP)
        worst = max(worst, _relative_error(float(grads[k][idx]), numeric))
    logger.debug(f"[gradcheck] {n_coords} coordinates, max rel err {worst:.2e}")
    return worst
