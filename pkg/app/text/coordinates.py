import numpy as np

from app.env.entities import GridState, Intervention, MoveObstacle, MoveVehicleForward, ToggleLight

NOOP_COORDINATES = (-1.0, -1.0)


def action_coordinates(iv: Intervention, state: GridState) -> np.ndarray:
    """
    Normalised grid coordinates of the entity an intervention acts on

    Coordinate-based action input: the cell that was "clicked", divided by
    H-1. Noop has no target and maps to (-1, -1).
    """
    if isinstance(iv, ToggleLight):
        pos = state.light(iv.light_id).pos
    elif isinstance(iv, MoveObstacle):
        pos = state.obstacle(iv.obstacle_id).pos
    elif isinstance(iv, MoveVehicleForward):
        pos = state.vehicle(iv.vehicle_id).pos
    else:
        return np.asarray(NOOP_COORDINATES, dtype=np.float64)
    scale = float(max(state.grid_size - 1, 1))
    return np.asarray((pos.x / scale, pos.y / scale), dtype=np.float64)
