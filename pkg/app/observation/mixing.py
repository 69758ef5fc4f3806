"""
Synthetic observation map

Stand-in for a renderer plus autoencoder: causal vectors are entangled by a
random full-rank affine map followed by an elementwise strictly increasing
nonlinearity, and the encoder undoes the nonlinearity and projects to the
pre-flow latent space.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from app.errors import DataError, DimensionError

logger = logging.getLogger(__name__)

Nonlinearity = Literal["linear", "sinh"]

SINGULAR_VALUE_MARGIN = 1e-3
MAX_RESAMPLES = 100


def _sample_full_rank(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    for attempt in range(MAX_RESAMPLES):
        matrix = rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols))
        if np.linalg.svd(matrix, compute_uv=False).min() > SINGULAR_VALUE_MARGIN:
            return matrix
        logger.debug(f"[obs] resampling {rows}x{cols} matrix (attempt {attempt + 1})")
    raise DataError(f"could not sample a full-rank {rows}x{cols} matrix")


@dataclass
class ObservationMap:
    mixing: np.ndarray      # D x K
    bias: np.ndarray        # D
    projection: np.ndarray  # M x D
    nonlinearity: Nonlinearity = "sinh"
    steepness: float = 1.0

    @property
    def K(self) -> int:
        return self.mixing.shape[1]

    @property
    def D(self) -> int:
        return self.mixing.shape[0]

    @property
    def M(self) -> int:
        return self.projection.shape[0]

    def _forward(self, u: np.ndarray) -> np.ndarray:
        if self.nonlinearity == "linear":
            return u
        return np.sinh(self.steepness * u) / self.steepness

    def _inverse(self, x: np.ndarray) -> np.ndarray:
        if self.nonlinearity == "linear":
            return x
        return np.arcsinh(self.steepness * x) / self.steepness

    def observe(self, causal: np.ndarray) -> np.ndarray:
        """X = nonlinearity(mixing @ C + bias); accepts a vector or an (n, K) batch"""
        causal = np.asarray(causal, dtype=np.float64)
        if causal.shape[-1] != self.K:
            raise DimensionError(f"causal vector has {causal.shape[-1]} entries, expected {self.K}")
        return self._forward(causal @ self.mixing.T + self.bias)

    def encode(self, observation: np.ndarray) -> np.ndarray:
        """E = projection @ inverse_nonlinearity(X); accepts a vector or an (n, D) batch"""
        observation = np.asarray(observation, dtype=np.float64)
        if observation.shape[-1] != self.D:
            raise DimensionError(f"observation has {observation.shape[-1]} entries, expected {self.D}")
        return self._inverse(observation) @ self.projection.T

    def recover_causal(self, observation: np.ndarray) -> np.ndarray:
        """Least-squares causal vector of an observation (exact on the image of observe)"""
        observation = np.asarray(observation, dtype=np.float64)
        if observation.shape[-1] != self.D:
            raise DimensionError(f"observation has {observation.shape[-1]} entries, expected {self.D}")
        pre = np.atleast_2d(self._inverse(observation) - self.bias)
        causal, *_ = np.linalg.lstsq(self.mixing, pre.T, rcond=None)
        return causal.T.reshape(observation.shape[:-1] + (self.K,))

    def to_dict(self) -> dict:
        return {
            "mixing": self.mixing.tolist(),
            "bias": self.bias.tolist(),
            "projection": self.projection.tolist(),
            "nonlinearity": self.nonlinearity,
            "steepness": self.steepness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObservationMap":
        return cls(
            mixing=np.asarray(data["mixing"], dtype=np.float64),
            bias=np.asarray(data["bias"], dtype=np.float64),
            projection=np.asarray(data["projection"], dtype=np.float64),
            nonlinearity=data.get("nonlinearity", "sinh"),
            steepness=float(data.get("steepness", 1.0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ObservationMap":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise DataError(f"observation map not found: {path}")


def make_mixing(
    K: int,
    D: int,
    rng: np.random.Generator,
    M: int = None,
    nonlinearity: Nonlinearity = "sinh",
) -> ObservationMap:
    """
    Sample an injective observation map and its encoder projection

    Args:
        K: Causal dimension
        D: Observation dimension (>= K)
        rng: numpy Generator
        M: Pre-flow latent dimension (K <= M <= D, default D)
        nonlinearity: "linear" or "sinh"

    Returns:
        ObservationMap whose mixing and projection clear the singular-value margin

    Raises:
        DimensionError: D < K, or M outside [K, D]
    """
    M = D if M is None else M
    if D < K:
        raise DimensionError(f"observation dimension {D} is smaller than causal dimension {K}")
    if not K <= M <= D:
        raise DimensionError(f"latent dimension {M} must lie in [{K}, {D}]")
    mixing = _sample_full_rank(D, K, rng)
    bias = rng.normal(0.0, 0.1, size=D)
    projection = _sample_full_rank(M, D, rng)
    logger.info(f"[obs] observation map K={K} D={D} M={M} ({nonlinearity})")
    return ObservationMap(mixing, bias, projection, nonlinearity)


def observe(obs_map: ObservationMap, causal) -> np.ndarray:
    return obs_map.observe(causal)


def encode(obs_map: ObservationMap, observation) -> np.ndarray:
    return obs_map.encode(observation)
