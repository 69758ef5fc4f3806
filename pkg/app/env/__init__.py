from app.env.entities import (
    DIRECTIONS,
    GridState,
    Intervention,
    MoveObstacle,
    MoveVehicleForward,
    Noop,
    Obstacle,
    Position,
    ToggleLight,
    TrafficLight,
    Vehicle,
    intervention_from_dict,
    intervention_to_dict,
    unresolved,
)
from app.env.colors import PALETTE, color_name
from app.env.dynamics import (
    apply_intervention,
    causal_vector,
    dynamics_step,
    free_directions,
    intervention_cycle,
    is_facing,
    next_position,
    resolve_intervention,
    valid_interventions,
)
from app.env.catalog import (
    CausalVariable,
    EntityCatalog,
    EntityInfo,
    denormalize_cell,
    round_half_toward_zero,
    state_from_causal,
)
from app.env.placement import random_init

__all__ = [
    'DIRECTIONS', 'GridState', 'Intervention', 'MoveObstacle', 'MoveVehicleForward', 'Noop',
    'Obstacle', 'Position', 'ToggleLight', 'TrafficLight', 'Vehicle',
    'intervention_from_dict', 'intervention_to_dict', 'unresolved',
    'PALETTE', 'color_name',
    'apply_intervention', 'causal_vector', 'dynamics_step', 'free_directions',
    'intervention_cycle', 'is_facing', 'next_position', 'resolve_intervention',
    'valid_interventions',
    'CausalVariable', 'EntityCatalog', 'EntityInfo', 'denormalize_cell',
    'round_half_toward_zero', 'state_from_causal',
    'random_init',
]
