"""
Permutation R^2 disentanglement score

Each causal variable is regressed on each latent separately with features
[1, z_i, z_i^2]; the resulting M x K R^2 matrix is matched latent-to-variable
with an optimal assignment and the matched diagonal is averaged.
"""
from typing import Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.errors import DegenerateData, DimensionError


def r2_matrix(latents, causal) -> np.ndarray:
    """R^2 of variable j regressed on latent i, shape (M, K)"""
    latents = np.asarray(latents, dtype=np.float64)
    causal = np.asarray(causal, dtype=np.float64)
    if latents.ndim != 2 or causal.ndim != 2 or len(latents) != len(causal):
        raise DimensionError(f"expected (n, M) and (n, K) matrices, got {latents.shape} and {causal.shape}")
    n, M = latents.shape
    K = causal.shape[1]
    if n < 2:
        raise DegenerateData(f"need at least 2 samples, got {n}")
    if M < K:
        raise DimensionError(f"need at least as many latents as causal variables (M={M}, K={K})")
    centered = causal - causal.mean(axis=0)
    total = (centered ** 2).sum(axis=0)
    constant = np.flatnonzero(total == 0)
    if constant.size:
        raise DegenerateData(f"causal variable(s) {constant.tolist()} are constant")

    out = np.zeros((M, K))
    for i in range(M):
        z = latents[:, i]
        scale = z.std()
        z = (z - z.mean()) / (scale if scale > 0 else 1.0)
        design = np.column_stack([np.ones(n), z, z ** 2])
        coef, *_ = np.linalg.lstsq(design, causal, rcond=None)
        residual = ((causal - design @ coef) ** 2).sum(axis=0)
        out[i] = 1.0 - residual / total
    return np.clip(out, 0.0, 1.0)


def assign_from_r2(matrix) -> Tuple[float, Tuple[int, ...]]:
    """
    Optimal latent-per-variable assignment of an (M, K) R^2 matrix

    Returns:
        (mean matched R^2, permutation) where permutation[j] is the latent
        assigned to variable j
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    perm = [0] * matrix.shape[1]
    for r, c in zip(rows, cols):
        perm[c] = int(r)
    score = float(np.mean([matrix[perm[j], j] for j in range(matrix.shape[1])])) if perm else 0.0
    return score, tuple(perm)


def r2_permutation_score(latents, causal) -> Tuple[float, Tuple[int, ...]]:
    return assign_from_r2(r2_matrix(latents, causal))
