import logging
from typing import List, Optional, Set, Tuple

import numpy as np

from app.config import EnvConfig
from app.env.entities import GridState, Obstacle, Position, TrafficLight, Vehicle
from app.errors import InfeasibleConfig

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 100


def _facing_cells(light: Position, grid_size: int) -> List[Tuple[Position, str]]:
    """Every (cell, orientation) from which a vehicle faces ``light``"""
    cells = []
    for y in range(light.y + 1, grid_size):
        cells.append((Position(light.x, y), "up"))
    for y in range(0, light.y):
        cells.append((Position(light.x, y), "down"))
    for x in range(light.x + 1, grid_size):
        cells.append((Position(x, light.y), "left"))
    for x in range(0, light.x):
        cells.append((Position(x, light.y), "right"))
    return cells


def _try_place(config: EnvConfig, rng: np.random.Generator) -> Optional[GridState]:
    H = config.grid_size
    taken: Set[Position] = set()

    lights = []
    for i, index in enumerate(rng.choice(H * H, size=config.n_lights, replace=False)):
        pos = Position(int(index) % H, int(index) // H)
        state = "green" if rng.random() < 0.5 else "red"
        lights.append(TrafficLight(i, pos, state, config.light_colors[i]))
        taken.add(pos)

    vehicles = []
    for i in range(config.n_vehicles):
        light = lights[i % config.n_lights]
        options = [(p, o) for p, o in _facing_cells(light.pos, H) if p not in taken]
        if not options:
            return None
        pos, orientation = options[int(rng.integers(len(options)))]
        vehicles.append(Vehicle(i, pos, orientation, config.vehicle_colors[i], light.id))
        taken.add(pos)

    free = [Position(x, y) for y in range(H) for x in range(H) if Position(x, y) not in taken]
    if len(free) < config.n_obstacles:
        return None
    obstacles = []
    for i, index in enumerate(rng.choice(len(free), size=config.n_obstacles, replace=False)):
        obstacles.append(Obstacle(i, free[int(index)], config.obstacle_colors[i]))

    return GridState(H, tuple(lights), tuple(vehicles), tuple(obstacles))


def random_init(config: EnvConfig, rng: np.random.Generator) -> GridState:
    """
    Random valid starting state

    Lights are placed first with uniform red/green states; vehicle i is bound
    to light ``i % n_lights`` and placed on a cell (with orientation) facing
    it; obstacles fill remaining free cells.

    Args:
        config: Environment configuration
        rng: numpy Generator

    Returns:
        GridState satisfying the occupancy invariants

    Raises:
        InfeasibleConfig: entities do not fit, or placement failed
            MAX_PLACEMENT_ATTEMPTS times
    """
    total = config.n_vehicles + config.n_obstacles + config.n_lights
    if total > config.grid_size ** 2:
        raise InfeasibleConfig(
            f"{total} entities do not fit on a {config.grid_size}x{config.grid_size} grid"
        )
    if config.n_vehicles > 0 and config.n_lights == 0:
        raise InfeasibleConfig("vehicles need at least one traffic light to face")

    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        state = _try_place(config, rng)
        if state is not None:
            return state
        logger.debug(f"[env] placement attempt {attempt + 1} failed, retrying")

    logger.warning(f"[env] placement failed after {MAX_PLACEMENT_ATTEMPTS} attempts")
    raise InfeasibleConfig(f"could not place entities after {MAX_PLACEMENT_ATTEMPTS} attempts")
