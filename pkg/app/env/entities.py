"""
GridWorld state types and interventions

All entities are frozen dataclasses; operations return new states instead of
mutating. Entity ids are their index in the owning tuple.
"""
from dataclasses import dataclass, replace
from typing import Dict, Literal, Optional, Tuple, Union

from app.errors import DataError, UnknownEntity

Orientation = Literal["up", "down", "left", "right"]
LightState = Literal["red", "green"]
RGB = Tuple[int, int, int]

DIRECTIONS: Tuple[str, ...] = ("up", "down", "left", "right")

# (dx, dy); y grows downwards, (0, 0) is the top-left cell
_OFFSETS: Dict[str, Tuple[int, int]] = {
    "up": (0, -1),
    "down": (0, 1),
    "left": (-1, 0),
    "right": (1, 0),
}


@dataclass(frozen=True)
class Position:
    x: int
    y: int

    def moved(self, direction: str) -> "Position":
        dx, dy = _OFFSETS[direction]
        return Position(self.x + dx, self.y + dy)

    def in_bounds(self, grid_size: int) -> bool:
        return 0 <= self.x < grid_size and 0 <= self.y < grid_size


@dataclass(frozen=True)
class TrafficLight:
    id: int
    pos: Position
    state: LightState
    color: RGB

    @property
    def is_green(self) -> bool:
        return self.state == "green"


@dataclass(frozen=True)
class Vehicle:
    id: int
    pos: Position
    orientation: Orientation
    color: RGB
    light_id: int


@dataclass(frozen=True)
class Obstacle:
    id: int
    pos: Position
    color: RGB


@dataclass(frozen=True)
class GridState:
    """Full ground-truth state; the causal variables live here"""
    grid_size: int
    lights: Tuple[TrafficLight, ...] = ()
    vehicles: Tuple[Vehicle, ...] = ()
    obstacles: Tuple[Obstacle, ...] = ()

    def light(self, light_id: int) -> TrafficLight:
        if not 0 <= light_id < len(self.lights):
            raise UnknownEntity("light", light_id)
        return self.lights[light_id]

    def vehicle(self, vehicle_id: int) -> Vehicle:
        if not 0 <= vehicle_id < len(self.vehicles):
            raise UnknownEntity("vehicle", vehicle_id)
        return self.vehicles[vehicle_id]

    def obstacle(self, obstacle_id: int) -> Obstacle:
        if not 0 <= obstacle_id < len(self.obstacles):
            raise UnknownEntity("obstacle", obstacle_id)
        return self.obstacles[obstacle_id]

    def occupied(self) -> Dict[Position, str]:
        """Map of occupied cells to the kind of entity on them"""
        cells: Dict[Position, str] = {}
        for light in self.lights:
            cells[light.pos] = "light"
        for obstacle in self.obstacles:
            cells[obstacle.pos] = "obstacle"
        for vehicle in self.vehicles:
            cells[vehicle.pos] = "vehicle"
        return cells

    def is_free(self, pos: Position) -> bool:
        return pos.in_bounds(self.grid_size) and pos not in self.occupied()

    def with_light(self, light: TrafficLight) -> "GridState":
        lights = list(self.lights)
        lights[light.id] = light
        return replace(self, lights=tuple(lights))

    def with_vehicle(self, vehicle: Vehicle) -> "GridState":
        vehicles = list(self.vehicles)
        vehicles[vehicle.id] = vehicle
        return replace(self, vehicles=tuple(vehicles))

    def with_obstacle(self, obstacle: Obstacle) -> "GridState":
        obstacles = list(self.obstacles)
        obstacles[obstacle.id] = obstacle
        return replace(self, obstacles=tuple(obstacles))

    def validate(self) -> bool:
        """
        Check the state invariants

        Raises:
            DataError: entity out of bounds, shared cell or dangling light_id
        """
        positions = [e.pos for e in (*self.lights, *self.vehicles, *self.obstacles)]
        for pos in positions:
            if not pos.in_bounds(self.grid_size):
                raise DataError(f"entity at {pos} is outside the {self.grid_size}x{self.grid_size} grid")
        if len(set(positions)) != len(positions):
            raise DataError("two entities share a cell")
        for vehicle in self.vehicles:
            if not 0 <= vehicle.light_id < len(self.lights):
                raise DataError(f"vehicle {vehicle.id} references missing light {vehicle.light_id}")
        return True

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "lights": [
                {"pos": [l.pos.x, l.pos.y], "state": l.state, "color": list(l.color)}
                for l in self.lights
            ],
            "vehicles": [
                {
                    "pos": [v.pos.x, v.pos.y],
                    "orientation": v.orientation,
                    "color": list(v.color),
                    "light_id": v.light_id,
                }
                for v in self.vehicles
            ],
            "obstacles": [
                {"pos": [o.pos.x, o.pos.y], "color": list(o.color)}
                for o in self.obstacles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridState":
        try:
            return cls(
                grid_size=int(data["grid_size"]),
                lights=tuple(
                    TrafficLight(i, Position(*item["pos"]), item["state"], tuple(item["color"]))
                    for i, item in enumerate(data.get("lights", []))
                ),
                vehicles=tuple(
                    Vehicle(
                        i,
                        Position(*item["pos"]),
                        item["orientation"],
                        tuple(item["color"]),
                        int(item["light_id"]),
                    )
                    for i, item in enumerate(data.get("vehicles", []))
                ),
                obstacles=tuple(
                    Obstacle(i, Position(*item["pos"]), tuple(item["color"]))
                    for i, item in enumerate(data.get("obstacles", []))
                ),
            )
        except (KeyError, TypeError) as e:
            raise DataError(f"malformed state record: {e}")


# ---------------------------------------------------------------------------
# Interventions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToggleLight:
    light_id: int
    kind = "toggle_light"


@dataclass(frozen=True)
class MoveObstacle:
    """``direction`` is filled in once the stochastic draw has been made"""
    obstacle_id: int
    direction: Optional[str] = None
    kind = "move_obstacle"


@dataclass(frozen=True)
class MoveVehicleForward:
    vehicle_id: int
    kind = "move_vehicle"


@dataclass(frozen=True)
class Noop:
    kind = "noop"


Intervention = Union[ToggleLight, MoveObstacle, MoveVehicleForward, Noop]


def unresolved(iv: Intervention) -> Intervention:
    """Drop a recorded obstacle direction so interventions compare by target"""
    if isinstance(iv, MoveObstacle) and iv.direction is not None:
        return MoveObstacle(iv.obstacle_id)
    return iv


def intervention_to_dict(iv: Intervention) -> dict:
    if isinstance(iv, ToggleLight):
        return {"type": iv.kind, "light_id": iv.light_id}
    if isinstance(iv, MoveObstacle):
        return {"type": iv.kind, "obstacle_id": iv.obstacle_id, "direction": iv.direction}
    if isinstance(iv, MoveVehicleForward):
        return {"type": iv.kind, "vehicle_id": iv.vehicle_id}
    return {"type": Noop.kind}


def intervention_from_dict(data: dict) -> Intervention:
    kind = data.get("type")
    if kind == ToggleLight.kind:
        return ToggleLight(int(data["light_id"]))
    if kind == MoveObstacle.kind:
        return MoveObstacle(int(data["obstacle_id"]), data.get("direction"))
    if kind == MoveVehicleForward.kind:
        return MoveVehicleForward(int(data["vehicle_id"]))
    if kind == Noop.kind:
        return Noop()
    raise DataError(f"unknown intervention type: {kind!r}")
