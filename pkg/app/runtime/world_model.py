"""
World models behind one interface

``CausalWorldModel`` runs the learned pipeline: encode an observation to
latents, embed an action sentence, step the gated transition prior in latent
space, and decode latents to causal variables and a state sentence.
``OracleWorldModel`` answers the same calls from the ground-truth simulator.
"""
import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np

from app.crl import CwmParams, embed_action, interaction_gates
from app.decoder import CausalMapper, describe_state, map_latents
from app.env import (
    EntityCatalog,
    GridState,
    Intervention,
    causal_vector,
    intervention_cycle,
    state_from_causal,
)
from app.errors import DataError, DimensionError, NumericalError
from app.observation import ObservationMap
from app.text import NOOP_COORDINATES, Vocabulary, action_coordinates, parse_action, tokenize_pad

logger = logging.getLogger(__name__)

SamplingMode = Literal["mean", "sample"]


@dataclass(frozen=True)
class LatentState:
    z: np.ndarray
    source: Literal["encoded", "transitioned"] = "encoded"
    mode: SamplingMode = "mean"

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise NumericalError("latent state has non-finite entries")
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class RolloutStep:
    z_next: LatentState
    text_current: str
    text_next: str


class WorldModel(Protocol):
    catalog: EntityCatalog
    template: Optional[GridState]

    def encode_obs(self, observation) -> LatentState: ...

    def initial_state(self, state: GridState) -> LatentState: ...

    def step(self, latent: LatentState, action_text: str, mode: SamplingMode = "mean",
             rng: Optional[np.random.Generator] = None, hint: Optional[Intervention] = None) -> RolloutStep: ...

    def decode_causal(self, latent: LatentState) -> np.ndarray: ...

    def describe(self, latent: LatentState) -> str: ...


class CausalWorldModel:
    """
    Learned world model

    Args:
        params: Trained flow, embedder and transition prior
        mapper: Latent -> causal variable mapper
        obs_map: Observation map whose encoder feeds the flow
        catalog: Entity catalog for state sentences
        vocabulary: Token table of the action embedder
        padding_length: Token sequence length used in training
        template: State carrying the immutable layout; needed to derive target
            coordinates for CB/HB action inputs
    """

    def __init__(
        self,
        params: CwmParams,
        mapper: CausalMapper,
        obs_map: ObservationMap,
        catalog: EntityCatalog,
        vocabulary: Vocabulary,
        padding_length: int = 32,
        template: Optional[GridState] = None,
    ):
        if obs_map.M != params.M or mapper.M != params.M:
            raise DimensionError(
                f"latent sizes disagree: observation map {obs_map.M}, model {params.M}, mapper {mapper.M}"
            )
        self.params = params
        self.mapper = mapper
        self.obs_map = obs_map
        self.catalog = catalog
        self.vocabulary = vocabulary
        self.padding_length = padding_length
        self.template = template
        params.eval()

    @property
    def M(self) -> int:
        return self.params.M

    def encode_obs(self, observation) -> LatentState:
        E = self.obs_map.encode(observation)
        return LatentState(self.params.encode(E), "encoded")

    def initial_state(self, state: GridState) -> LatentState:
        """Render ``state`` through the observation map and encode it"""
        return self.encode_obs(self.obs_map.observe(causal_vector(state)))

    def _coordinates(self, text: str, latent: Optional[LatentState]) -> np.ndarray:
        if self.template is None or latent is None:
            return np.asarray(NOOP_COORDINATES, dtype=np.float64)
        state = state_from_causal(self.template, self.decode_causal(latent))
        try:
            return action_coordinates(parse_action(text, state), state)
        except DataError as e:
            logger.debug(f"[cwm] no coordinates for {text!r}: {e.message}")
            return np.asarray(NOOP_COORDINATES, dtype=np.float64)

    def encode_action(self, text: str, latent: Optional[LatentState] = None) -> np.ndarray:
        """Action vector of a sentence; CB/HB inputs read target coordinates off ``latent``"""
        embedder = self.params.embedder
        tokens = tokenize_pad(text, self.vocabulary, self.padding_length) if embedder.uses_text else None
        coords = self._coordinates(text, latent) if embedder.uses_coords else None
        return embed_action(embedder, tokens, coords)

    def sample_next_state(
        self,
        latent: LatentState,
        action,
        mode: SamplingMode = "mean",
        rng: Optional[np.random.Generator] = None,
    ) -> RolloutStep:
        """
        One latent transition

        ``mode="mean"`` returns the predicted means; ``mode="sample"`` draws
        from the per-latent Gaussians (needs ``rng``).
        """
        z = latent.z
        if z.shape != (self.M,):
            raise DimensionError(f"latent has shape {z.shape}, expected ({self.M},)")
        gates = interaction_gates(self.params.transition, action, z)
        mean, log_std = self.params.transition.conditional(z[None], gates)
        z_next = mean.data[0]
        if mode == "sample":
            if rng is None:
                raise ValueError("sample mode needs an rng")
            z_next = z_next + np.exp(log_std.data[0]) * rng.normal(size=self.M)
        elif mode != "mean":
            raise ValueError(f"unknown sampling mode {mode!r}")
        nxt = LatentState(z_next, "transitioned", mode)
        return RolloutStep(nxt, self.decode_state(latent), self.decode_state(nxt))

    def step(self, latent: LatentState, action_text: str, mode: SamplingMode = "mean",
             rng: Optional[np.random.Generator] = None, hint: Optional[Intervention] = None) -> RolloutStep:
        return self.sample_next_state(latent, self.encode_action(action_text, latent), mode, rng)

    def decode_causal(self, latent: LatentState) -> np.ndarray:
        return map_latents(self.mapper, latent.z)

    def decode_state(self, latent: LatentState) -> str:
        return describe_state(self.decode_causal(latent), self.catalog)

    describe = decode_state

    def inference_trajectory(
        self,
        observation,
        action_texts: Sequence[str],
        mode: SamplingMode = "mean",
        rng: Optional[np.random.Generator] = None,
    ) -> List[Tuple[LatentState, str]]:
        """(z0, text0) followed by one pair per action; the observation is encoded once"""
        latent = self.encode_obs(observation)
        out = [(latent, self.decode_state(latent))]
        for text in action_texts:
            step = self.step(latent, text, mode, rng)
            latent = step.z_next
            out.append((latent, step.text_next))
        return out


class OracleWorldModel:
    """
    Ground-truth simulator with the world-model interface

    Latents are causal vectors. ``hint`` replays a recorded (resolved)
    intervention so stochastic obstacle moves match a dataset exactly.
    """

    def __init__(self, template: GridState, obs_map: Optional[ObservationMap] = None,
                 rng: Optional[np.random.Generator] = None):
        self.template = template
        self.catalog = EntityCatalog.from_state(template)
        self.obs_map = obs_map
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def initial_state(self, state: GridState) -> LatentState:
        return LatentState(causal_vector(state), "encoded")

    def encode_obs(self, observation) -> LatentState:
        """Invert the observation map by least squares (needs ``obs_map``)"""
        if self.obs_map is None:
            raise DataError("oracle world model has no observation map to invert")
        state = state_from_causal(self.template, self.obs_map.recover_causal(observation))
        return LatentState(causal_vector(state), "encoded")

    def state_of(self, latent: LatentState) -> GridState:
        return state_from_causal(self.template, latent.z)

    def step(self, latent: LatentState, action_text: str, mode: SamplingMode = "mean",
             rng: Optional[np.random.Generator] = None, hint: Optional[Intervention] = None) -> RolloutStep:
        state = self.state_of(latent)
        iv = hint if hint is not None else parse_action(action_text, state)
        nxt = LatentState(causal_vector(intervention_cycle(state, iv, rng or self.rng)), "transitioned", mode)
        return RolloutStep(nxt, self.describe(latent), self.describe(nxt))

    def decode_causal(self, latent: LatentState) -> np.ndarray:
        return latent.z.copy()

    def describe(self, latent: LatentState) -> str:
        return describe_state(latent.z, self.catalog)
