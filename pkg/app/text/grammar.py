"""
Probabilistic grammar for intervention descriptions

A description is built from a single production

    "You" modifier verb "the" adjective "," colour noun [direction] "."

where modifier, verb and adjective are drawn from weighted word sets that
depend on the action type and the object type.
"""
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List

import numpy as np

from app.env.catalog import NOUNS
from app.env.colors import PALETTE, color_name
from app.env.entities import (
    GridState,
    Intervention,
    MoveObstacle,
    MoveVehicleForward,
    Noop,
    ToggleLight,
)
from app.errors import ConfigError

NOOP_SENTENCE = "You did nothing."
NOOP_CANONICAL = "you did nothing"

# Direction phrase for a vehicle moving along its orientation
VEHICLE_DIRECTIONS: Dict[str, str] = {
    "right": "to the right",
    "left": "to the left",
    "up": "up",
    "down": "down",
}

WeightTable = Dict[str, float]


def _default_adjectives() -> Dict[str, WeightTable]:
    return {
        "vehicle": {w: 1.0 for w in ("sleek", "shiny", "small", "fast", "compact", "rusty")},
        "obstacle": {w: 1.0 for w in ("heavy", "large", "rough", "bulky", "solid")},
        "light": {w: 1.0 for w in ("bright", "tall", "flickering", "metal", "busy")},
    }


def _default_modifiers() -> WeightTable:
    return {w: 1.0 for w in (
        "skillfully", "carefully", "quickly", "gently", "deliberately", "swiftly", "calmly",
    )}


def _default_verbs() -> Dict[str, WeightTable]:
    return {
        ToggleLight.kind: {w: 1.0 for w in ("toggled", "switched", "flipped", "changed")},
        MoveObstacle.kind: {w: 1.0 for w in ("moved", "pushed", "shifted", "nudged")},
        MoveVehicleForward.kind: {w: 1.0 for w in ("moved", "drove", "advanced", "steered")},
    }


def target_kind(iv: Intervention) -> str:
    if isinstance(iv, ToggleLight):
        return "light"
    if isinstance(iv, MoveObstacle):
        return "obstacle"
    return "vehicle"


def target_color(iv: Intervention, state: GridState) -> str:
    """Colour word of the entity an intervention acts on"""
    if isinstance(iv, ToggleLight):
        return color_name(state.light(iv.light_id).color)
    if isinstance(iv, MoveObstacle):
        return color_name(state.obstacle(iv.obstacle_id).color)
    return color_name(state.vehicle(iv.vehicle_id).color)


@dataclass
class Pcfg:
    adjectives: Dict[str, WeightTable] = field(default_factory=_default_adjectives)
    modifiers: WeightTable = field(default_factory=_default_modifiers)
    verbs: Dict[str, WeightTable] = field(default_factory=_default_verbs)

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        Check weight tables and word-set collisions

        Raises:
            ConfigError: missing entry, non-positive weight, or a word that
                collides with a colour or noun (which would break parsing)
        """
        for kind in NOUNS:
            if not self.adjectives.get(kind):
                raise ConfigError(f"grammar has no adjectives for object type {kind!r}")
        for kind in (ToggleLight.kind, MoveObstacle.kind, MoveVehicleForward.kind):
            if not self.verbs.get(kind):
                raise ConfigError(f"grammar has no verbs for action type {kind!r}")
        if not self.modifiers:
            raise ConfigError("grammar has no modifiers")

        reserved = set(PALETTE) | {w for noun in NOUNS.values() for w in noun.split()}
        tables = [self.modifiers, *self.adjectives.values(), *self.verbs.values()]
        for table in tables:
            for word, weight in table.items():
                if weight <= 0:
                    raise ConfigError(f"grammar weight for {word!r} must be positive")
                if set(word.split()) & reserved:
                    raise ConfigError(f"grammar word {word!r} collides with a colour or noun")

        toggles = set(self.verbs[ToggleLight.kind])
        moves = set(self.verbs[MoveObstacle.kind]) | set(self.verbs[MoveVehicleForward.kind])
        if toggles & moves:
            raise ConfigError(f"verbs {sorted(toggles & moves)} are shared by toggle and move actions")
        return True

    # ----- sampling -----

    @staticmethod
    def _draw(table: WeightTable, rng: np.random.Generator) -> str:
        words = list(table)
        weights = np.asarray([table[w] for w in words], dtype=np.float64)
        return words[int(rng.choice(len(words), p=weights / weights.sum()))]

    def describe_action(self, iv: Intervention, state: GridState, rng: np.random.Generator) -> str:
        """
        Sample a natural-language description of an intervention

        Args:
            iv: Intervention valid for ``state``
            state: State the intervention acts on
            rng: numpy Generator

        Returns:
            Sentence such as "You skillfully moved the sleek, blue car to the right."

        Raises:
            UnknownEntity: referenced id does not exist
        """
        if isinstance(iv, Noop):
            return NOOP_SENTENCE
        kind = target_kind(iv)
        color = target_color(iv, state)
        modifier = self._draw(self.modifiers, rng)
        verb = self._draw(self.verbs[iv.kind], rng)
        adjective = self._draw(self.adjectives[kind], rng)
        return self._render(iv, state, modifier, verb, adjective, color)

    def _render(self, iv, state, modifier, verb, adjective, color) -> str:
        sentence = f"You {modifier} {verb} the {adjective}, {color} {NOUNS[target_kind(iv)]}"
        if isinstance(iv, MoveVehicleForward):
            sentence += " " + VEHICLE_DIRECTIONS[state.vehicle(iv.vehicle_id).orientation]
        return sentence + "."

    def expansions(self, iv: Intervention, state: GridState) -> Iterator[str]:
        """Every sentence the grammar can produce for ``iv``"""
        if isinstance(iv, Noop):
            yield NOOP_SENTENCE
            return
        kind = target_kind(iv)
        color = target_color(iv, state)
        for modifier, verb, adjective in itertools.product(
            self.modifiers, self.verbs[iv.kind], self.adjectives[kind]
        ):
            yield self._render(iv, state, modifier, verb, adjective, color)

    def words(self) -> List[str]:
        """Closure of terminal words the grammar can emit"""
        out = {"you", "the", "did", "nothing", "to"}
        out.update(self.modifiers)
        for table in (*self.adjectives.values(), *self.verbs.values()):
            out.update(table)
        for phrase in (*NOUNS.values(), *VEHICLE_DIRECTIONS.values()):
            out.update(phrase.split())
        out.update(PALETTE)
        # canonical verbs
        out.update(("toggled", "moved"))
        return sorted(out)

    # ----- persistence -----

    def to_dict(self) -> dict:
        return {
            "adjectives": self.adjectives,
            "modifiers": self.modifiers,
            "verbs": self.verbs,
            "palette": {name: list(rgb) for name, rgb in PALETTE.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Pcfg":
        try:
            return cls(
                adjectives={k: dict(v) for k, v in data["adjectives"].items()},
                modifiers=dict(data["modifiers"]),
                verbs={k: dict(v) for k, v in data["verbs"].items()},
            )
        except (KeyError, AttributeError) as e:
            raise ConfigError(f"malformed grammar file: {e}")

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "Pcfg":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"grammar file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"grammar file {path} is not valid JSON: {e}")
        return cls.from_dict(data)


def canonical_describe(iv: Intervention, state: GridState) -> str:
    """
    Modifier- and adjective-free rendering of an intervention

    Distinct interventions on one state produce distinct strings as long as
    colour words are unique within each entity class.
    """
    if isinstance(iv, Noop):
        return NOOP_CANONICAL
    color = target_color(iv, state)
    if isinstance(iv, ToggleLight):
        return f"you toggled the {color} traffic light"
    return f"you moved the {color} {NOUNS[target_kind(iv)]}"


def describe_action(iv: Intervention, state: GridState, pcfg: Pcfg, rng: np.random.Generator) -> str:
    return pcfg.describe_action(iv, state, rng)
