from dataclasses import dataclass
from typing import List

import numpy as np

from app.env import EntityCatalog, Intervention, MoveObstacle, MoveVehicleForward, Noop, ToggleLight, denormalize_cell
from app.errors import DimensionError

CATEGORIES = ("Change Light State", "No Action", "Move")


@dataclass(frozen=True)
class MatchPolicy:
    """
    Which causal variables count when comparing a predicted and a true state

    Positions compare as grid cells after denormalisation, light states after
    thresholding at 0.5. Stochastic obstacle positions are skipped by default.
    """
    exclude_obstacles: bool = True

    def indices(self, catalog: EntityCatalog) -> List[int]:
        return [
            i for i, var in enumerate(catalog.variables)
            if not (self.exclude_obstacles and var.kind == "obstacle")
        ]


def states_match(pred, true, catalog: EntityCatalog, policy: MatchPolicy = MatchPolicy()) -> bool:
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape or pred.shape != (catalog.K,):
        raise DimensionError(f"cannot compare states of shapes {pred.shape} and {true.shape} (K={catalog.K})")
    variables = catalog.variables
    H = catalog.grid_size
    for i in policy.indices(catalog):
        if variables[i].var_type == "categorical":
            if (pred[i] >= 0.5) != (true[i] >= 0.5):
                return False
        elif denormalize_cell(pred[i], H) != denormalize_cell(true[i], H):
            return False
    return True


def category_of(iv: Intervention) -> str:
    if isinstance(iv, ToggleLight):
        return "Change Light State"
    if isinstance(iv, Noop):
        return "No Action"
    if isinstance(iv, (MoveObstacle, MoveVehicleForward)):
        return "Move"
    raise ValueError(f"unknown intervention {iv!r}")


def categorize_coordinates(x: float, y: float, scene) -> str:
    """Category of a coordinate-based action in a 3D scene"""
    raise NotImplementedError("coordinate categorisation needs a 3D scene backend, which this package does not ship")
