"""
Entity catalog: names, colours and causal-variable layout of a GridWorld

The catalog is derived from a state once and stored in dataset headers so the
decoder, state descriptor, action parser and evaluation all agree on which
index of the causal vector means what.
"""
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.env.colors import color_name
from app.env.entities import GridState, Obstacle, Position, TrafficLight, Vehicle
from app.errors import DataError, DimensionError

EntityKind = Literal["vehicle", "obstacle", "light"]
VariableType = Literal["numerical", "categorical", "angle"]

NOUNS: Dict[str, str] = {"vehicle": "car", "obstacle": "obstacle", "light": "traffic light"}


@dataclass(frozen=True)
class EntityInfo:
    kind: EntityKind
    id: int
    color: str

    @property
    def noun(self) -> str:
        return NOUNS[self.kind]

    @property
    def label(self) -> str:
        return f"{self.color} {self.noun}"


@dataclass(frozen=True)
class CausalVariable:
    name: str
    kind: EntityKind
    entity_id: int
    field: str  # "x", "y" or "state"
    var_type: VariableType
    n_classes: int = 0


@dataclass(frozen=True)
class EntityCatalog:
    grid_size: int
    vehicles: Tuple[EntityInfo, ...]
    obstacles: Tuple[EntityInfo, ...]
    lights: Tuple[EntityInfo, ...]

    @classmethod
    def from_state(cls, state: GridState) -> "EntityCatalog":
        catalog = cls(
            grid_size=state.grid_size,
            vehicles=tuple(EntityInfo("vehicle", v.id, color_name(v.color)) for v in state.vehicles),
            obstacles=tuple(EntityInfo("obstacle", o.id, color_name(o.color)) for o in state.obstacles),
            lights=tuple(EntityInfo("light", l.id, color_name(l.color)) for l in state.lights),
        )
        catalog.check_unique_colors()
        return catalog

    def check_unique_colors(self):
        """Colour words must identify an entity within its class"""
        for group in (self.vehicles, self.obstacles, self.lights):
            names = [e.color for e in group]
            if len(set(names)) != len(names):
                raise DataError(f"duplicate colour names within one entity class: {names}")

    @property
    def variables(self) -> List[CausalVariable]:
        out: List[CausalVariable] = []
        for v in self.vehicles:
            out.append(CausalVariable(f"vehicle_{v.id}.x", "vehicle", v.id, "x", "numerical"))
            out.append(CausalVariable(f"vehicle_{v.id}.y", "vehicle", v.id, "y", "numerical"))
        for o in self.obstacles:
            out.append(CausalVariable(f"obstacle_{o.id}.x", "obstacle", o.id, "x", "numerical"))
            out.append(CausalVariable(f"obstacle_{o.id}.y", "obstacle", o.id, "y", "numerical"))
        for l in self.lights:
            out.append(CausalVariable(f"light_{l.id}.state", "light", l.id, "state", "categorical", 2))
        return out

    @property
    def K(self) -> int:
        return 2 * len(self.vehicles) + 2 * len(self.obstacles) + len(self.lights)

    def indices(self, kind: EntityKind) -> List[int]:
        return [i for i, var in enumerate(self.variables) if var.kind == kind]

    def entities(self) -> List[EntityInfo]:
        return [*self.vehicles, *self.obstacles, *self.lights]

    def find(self, kind: EntityKind, color: str) -> Optional[EntityInfo]:
        group = {"vehicle": self.vehicles, "obstacle": self.obstacles, "light": self.lights}[kind]
        for entity in group:
            if entity.color == color:
                return entity
        return None

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "vehicles": [e.color for e in self.vehicles],
            "obstacles": [e.color for e in self.obstacles],
            "lights": [e.color for e in self.lights],
            "variables": [v.name for v in self.variables],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EntityCatalog":
        return cls(
            grid_size=int(data["grid_size"]),
            vehicles=tuple(EntityInfo("vehicle", i, c) for i, c in enumerate(data["vehicles"])),
            obstacles=tuple(EntityInfo("obstacle", i, c) for i, c in enumerate(data["obstacles"])),
            lights=tuple(EntityInfo("light", i, c) for i, c in enumerate(data["lights"])),
        )


def round_half_toward_zero(values) -> np.ndarray:
    """Nearest integer with exact .5 ties rounded toward zero"""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.ceil(np.abs(values) - 0.5)


def denormalize_cell(value: float, grid_size: int) -> int:
    """Normalised coordinate -> integer cell, clipped to the grid"""
    cell = round_half_toward_zero(value * max(grid_size - 1, 1))
    return int(np.clip(cell, 0, grid_size - 1))


def state_from_causal(template: GridState, causal: Sequence[float]) -> GridState:
    """
    Rebuild a GridState from a causal vector

    Positions are denormalised and light states thresholded at 0.5; the
    immutable parts (orientations, light positions, colours, light bindings)
    come from ``template``. The result may violate occupancy invariants when
    ``causal`` is a model estimate.
    """
    causal = np.asarray(causal, dtype=np.float64)
    K = 2 * len(template.vehicles) + 2 * len(template.obstacles) + len(template.lights)
    if causal.shape != (K,):
        raise DimensionError(f"causal vector has shape {causal.shape}, expected ({K},)")
    H = template.grid_size
    i = 0
    vehicles = []
    for v in template.vehicles:
        pos = Position(denormalize_cell(causal[i], H), denormalize_cell(causal[i + 1], H))
        vehicles.append(Vehicle(v.id, pos, v.orientation, v.color, v.light_id))
        i += 2
    obstacles = []
    for o in template.obstacles:
        pos = Position(denormalize_cell(causal[i], H), denormalize_cell(causal[i + 1], H))
        obstacles.append(Obstacle(o.id, pos, o.color))
        i += 2
    lights = []
    for l in template.lights:
        state = "green" if causal[i] >= 0.5 else "red"
        lights.append(TrafficLight(l.id, l.pos, state, l.color))
        i += 1
    return GridState(H, tuple(lights), tuple(vehicles), tuple(obstacles))
