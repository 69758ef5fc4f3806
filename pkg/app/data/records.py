"""
Dataset record types

Every record serialises to a plain JSON object; floats go through ``repr``
so a save/load cycle is bit-exact.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.env.catalog import EntityCatalog, denormalize_cell, state_from_causal
from app.env.entities import GridState, Intervention, intervention_from_dict, intervention_to_dict
from app.errors import DataError, EmptyDataset
from app.text.tokenizer import TokenSeq


def _vec(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


@dataclass
class StepRecord:
    t: int
    pre_state_causal: np.ndarray
    intervention: Intervention
    action_text: str
    action_tokens: TokenSeq
    action_coords: np.ndarray
    observation: np.ndarray
    next_observation: np.ndarray
    post_state_causal: np.ndarray

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "pre_state_causal": self.pre_state_causal.tolist(),
            "intervention": intervention_to_dict(self.intervention),
            "action_text": self.action_text,
            "action_tokens": list(self.action_tokens.ids),
            "attention_len": self.action_tokens.attention_len,
            "action_coords": self.action_coords.tolist(),
            "observation": self.observation.tolist(),
            "next_observation": self.next_observation.tolist(),
            "post_state_causal": self.post_state_causal.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StepRecord":
        try:
            return cls(
                t=int(data["t"]),
                pre_state_causal=_vec(data["pre_state_causal"]),
                intervention=intervention_from_dict(data["intervention"]),
                action_text=data["action_text"],
                action_tokens=TokenSeq(tuple(int(i) for i in data["action_tokens"]), int(data["attention_len"])),
                action_coords=_vec(data["action_coords"]),
                observation=_vec(data["observation"]),
                next_observation=_vec(data["next_observation"]),
                post_state_causal=_vec(data["post_state_causal"]),
            )
        except KeyError as e:
            raise DataError(f"step record is missing field {e}")


@dataclass
class Trajectory:
    """Consecutive steps from one seed; ``initial_state`` carries the immutable layout"""
    seed: int
    initial_state: GridState
    steps: List[StepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def state_at(self, t: int) -> GridState:
        """Full state before step ``t`` (``t == len`` gives the final state)"""
        if t == len(self.steps):
            return state_from_causal(self.initial_state, self.steps[-1].post_state_causal)
        return state_from_causal(self.initial_state, self.steps[t].pre_state_causal)

    def header(self) -> dict:
        return {"type": "trajectory", "seed": self.seed, "length": len(self.steps),
                "initial_state": self.initial_state.to_dict()}


@dataclass
class Episode:
    """N consecutive steps spliced out of a trajectory"""
    n_steps: int
    start_state: GridState
    start_state_causal: np.ndarray
    start_observation: np.ndarray
    actions: List[str]
    interventions: List[Intervention]
    end_state_causal: np.ndarray
    source_seed: int = -1
    source_t: int = 0

    def to_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "start_state": self.start_state.to_dict(),
            "start_state_causal": self.start_state_causal.tolist(),
            "start_observation": self.start_observation.tolist(),
            "actions": list(self.actions),
            "interventions": [intervention_to_dict(iv) for iv in self.interventions],
            "end_state_causal": self.end_state_causal.tolist(),
            "source_seed": self.source_seed,
            "source_t": self.source_t,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Episode":
        return cls(
            n_steps=int(data["n_steps"]),
            start_state=GridState.from_dict(data["start_state"]),
            start_state_causal=_vec(data["start_state_causal"]),
            start_observation=_vec(data["start_observation"]),
            actions=list(data["actions"]),
            interventions=[intervention_from_dict(d) for d in data["interventions"]],
            end_state_causal=_vec(data["end_state_causal"]),
            source_seed=int(data.get("source_seed", -1)),
            source_t=int(data.get("source_t", 0)),
        )


@dataclass
class IclExample:
    """(initial causal variables, actions, end causal variables) plus their texts"""
    start_state_causal: np.ndarray
    actions: List[str]
    end_state_causal: np.ndarray
    start_text: str = ""
    end_text: str = ""

    def to_dict(self) -> dict:
        return {
            "start_state_causal": self.start_state_causal.tolist(),
            "actions": list(self.actions),
            "end_state_causal": self.end_state_causal.tolist(),
            "start_text": self.start_text,
            "end_text": self.end_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IclExample":
        return cls(
            start_state_causal=_vec(data["start_state_causal"]),
            actions=list(data["actions"]),
            end_state_causal=_vec(data["end_state_causal"]),
            start_text=data.get("start_text", ""),
            end_text=data.get("end_text", ""),
        )


@dataclass
class IclPool:
    examples: List[IclExample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.examples)

    def sample(self, rng: np.random.Generator, k: int = 2) -> List[IclExample]:
        """Draw ``k`` distinct examples"""
        if len(self.examples) < k:
            raise EmptyDataset(f"ICL pool holds {len(self.examples)} examples, cannot draw {k}")
        picks = rng.choice(len(self.examples), size=k, replace=False)
        return [self.examples[int(i)] for i in picks]


@dataclass
class SelfEvalSample:
    state_text: str
    action_text: str
    label: Literal["good", "bad"]

    def to_dict(self) -> dict:
        return {"state_text": self.state_text, "action_text": self.action_text, "label": self.label}

    @classmethod
    def from_dict(cls, data: dict) -> "SelfEvalSample":
        if data.get("label") not in ("good", "bad"):
            raise DataError(f"self-eval label must be good or bad, got {data.get('label')!r}")
        return cls(data["state_text"], data["action_text"], data["label"])


class PlanningTask(BaseModel):
    """One planning problem: reach ``goal_variables`` from ``start_state``"""
    task_id: int
    n_steps: int = Field(ge=0)
    start_state: dict
    goal_variables: Dict[str, float]
    reference_actions: List[str] = Field(default_factory=list)
    seed: Optional[int] = None

    def grid_state(self) -> GridState:
        return GridState.from_dict(self.start_state)

    def goal_indices(self, catalog: EntityCatalog) -> List[int]:
        names = [v.name for v in catalog.variables]
        try:
            return [names.index(name) for name in self.goal_variables]
        except ValueError:
            raise DataError(f"goal refers to variables outside {names}")

    def goal_mismatches(self, causal, catalog: EntityCatalog) -> int:
        """Number of goal variables that differ after denormalisation (positions) or thresholding (lights)"""
        causal = np.asarray(causal, dtype=np.float64)
        variables = catalog.variables
        H = catalog.grid_size
        misses = 0
        for idx, target in zip(self.goal_indices(catalog), self.goal_variables.values()):
            if variables[idx].var_type == "categorical":
                misses += (causal[idx] >= 0.5) != (target >= 0.5)
            else:
                misses += denormalize_cell(causal[idx], H) != denormalize_cell(target, H)
        return int(misses)

    def goal_reached(self, causal, catalog: EntityCatalog) -> bool:
        return self.goal_mismatches(causal, catalog) == 0
