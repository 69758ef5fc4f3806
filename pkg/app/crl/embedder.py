"""
Action embedder

TB (text): hash-bucket token table, mean pooled over non-pad tokens, then a
2-layer MLP head. CB (coordinates): linear head on the normalised target cell.
HB: sum of both heads.
"""
from typing import Literal, Optional

import numpy as np

from app.errors import DimensionError
from app.nn import Linear, Mlp, Module, Tensor, parameter, take
from app.text.tokenizer import PAD_ID, TokenSeq

Modality = Literal["CB", "TB", "HB"]
MODALITIES = ("CB", "TB", "HB")


class ActionEmbedder(Module):
    def __init__(
        self,
        modality: Modality,
        vocab_size: int,
        token_dim: int,
        hidden: int,
        out_dim: int,
        rng: np.random.Generator,
    ):
        if modality not in MODALITIES:
            raise ValueError(f"unknown action modality {modality!r}")
        self.modality = modality
        self.vocab_size = vocab_size
        self.out_dim = out_dim
        if self.uses_text:
            self.table = parameter(rng.normal(0.0, 0.1, size=(vocab_size, token_dim)))
            self.text_head = Mlp([token_dim, hidden, out_dim], rng)
        if self.uses_coords:
            self.coord_head = Linear(2, out_dim, rng)

    @property
    def uses_text(self) -> bool:
        return self.modality in ("TB", "HB")

    @property
    def uses_coords(self) -> bool:
        return self.modality in ("CB", "HB")

    def text_parameters(self):
        if not self.uses_text:
            return []
        return [self.table, *self.text_head.parameters()]

    def pooled(self, tokens: np.ndarray) -> Tensor:
        """Mean of token embeddings over non-pad positions; all-pad rows pool to zero"""
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        if tokens.max(initial=0) >= self.vocab_size:
            raise DimensionError(f"token id {tokens.max()} outside vocabulary of {self.vocab_size}")
        mask = (tokens != PAD_ID).astype(np.float64)
        counts = np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
        vectors = take(self.table, tokens)
        return (vectors * mask[..., None]).sum(axis=1) / counts

    def forward(self, tokens: Optional[np.ndarray] = None, coords: Optional[np.ndarray] = None) -> Tensor:
        out = None
        if self.uses_text:
            if tokens is None:
                raise DimensionError(f"{self.modality} embedder needs action tokens")
            out = self.text_head(self.pooled(tokens))
        if self.uses_coords:
            if coords is None:
                raise DimensionError(f"{self.modality} embedder needs action coordinates")
            coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
            if coords.shape[-1] != 2:
                raise DimensionError(f"action coordinates must be pairs, got shape {coords.shape}")
            head = self.coord_head(coords)
            out = head if out is None else out + head
        return out


def embed_action(
    embedder: ActionEmbedder,
    tokens: Optional[TokenSeq] = None,
    coords: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Action vector for one action (no tape)"""
    ids = None
    if tokens is not None:
        ids = tokens.as_array() if isinstance(tokens, TokenSeq) else np.asarray(tokens)
    return embedder(ids, coords).data[0]
