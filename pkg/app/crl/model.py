from typing import Dict, List, Optional

import numpy as np

from app.config import TrainConfig
from app.crl.embedder import ActionEmbedder
from app.crl.transition import TransitionModel
from app.errors import DimensionError
from app.nn import CouplingFlow, Module, Tensor


class CwmParams(Module):
    """
    Trainable core of the world model: flow, action embedder, gated transition

    ``metadata`` carries seed, dataset hash, modality and the loss history;
    it is written to the checkpoint manifest, never to the tensor blob.
    """

    def __init__(self, config: TrainConfig, vocab_size: int, rng: Optional[np.random.Generator] = None):
        config.validate()
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.config = config
        self.vocab_size = vocab_size
        self.flow = CouplingFlow(config.latent_dim, config.flow_layers, config.flow_hidden, rng, config.flow_linear)
        self.embedder = ActionEmbedder(
            config.modality, vocab_size, config.token_dim, config.hidden_dim, config.action_dim, rng
        )
        self.transition = TransitionModel(config.latent_dim, config.action_dim, config.hidden_dim, config.gate_hidden, rng)
        self.metadata: Dict = {"modality": config.modality, "seed": config.seed}

    @property
    def M(self) -> int:
        return self.config.latent_dim

    @property
    def modality(self) -> str:
        return self.config.modality

    def text_parameters(self) -> List[Tensor]:
        return self.embedder.text_parameters()

    def main_parameters(self) -> List[Tensor]:
        text = {id(p) for p in self.text_parameters()}
        return [p for p in self.parameters() if id(p) not in text]

    def encode(self, E) -> np.ndarray:
        """Latents of encoder outputs (no tape)"""
        E = np.asarray(E, dtype=np.float64)
        if E.shape[-1] != self.M:
            raise DimensionError(f"encoder output has {E.shape[-1]} dims, model expects {self.M}")
        z, _ = self.flow(E)
        return z.data

    def checkpoint_metadata(self) -> dict:
        return {
            **self.metadata,
            "train_config": self.config.to_dict(),
            "vocab_size": self.vocab_size,
        }

    @classmethod
    def from_checkpoint(cls, tensors: Dict[str, np.ndarray], metadata: dict) -> "CwmParams":
        config = TrainConfig.from_dict(metadata["train_config"])
        params = cls(config, int(metadata["vocab_size"]), np.random.default_rng(0))
        params.load_state_dict(tensors)
        params.metadata = {k: v for k, v in metadata.items() if k not in ("train_config", "vocab_size", "mapper")}
        return params
