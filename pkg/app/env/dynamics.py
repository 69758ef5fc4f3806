"""
GridWorld transition rules

One timestep is ``intervention_cycle``: the environment dynamics run first,
then the intervention is applied to the result.
"""
from typing import List

import numpy as np

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
)


def is_facing(vehicle: Vehicle, light: TrafficLight) -> bool:
    """True iff the vehicle points at the light along its row or column"""
    v, tl = vehicle.pos, light.pos
    if vehicle.orientation == "up":
        return v.x == tl.x and v.y > tl.y
    if vehicle.orientation == "down":
        return v.x == tl.x and v.y < tl.y
    if vehicle.orientation == "left":
        return v.y == tl.y and v.x > tl.x
    if vehicle.orientation == "right":
        return v.y == tl.y and v.x < tl.x
    return False


def next_position(pos: Position, orientation: str) -> Position:
    """One-cell displacement; the result may lie outside the grid"""
    return pos.moved(orientation)


def dynamics_step(state: GridState) -> GridState:
    """
    Advance every vehicle that faces its green light and has a free cell ahead

    Vehicles move in ascending id order and each one checks occupancy against
    the positions left by the vehicles processed before it.

    Args:
        state: Current state (not mutated)

    Returns:
        New state after the dynamics phase
    """
    current = state
    for vehicle in state.vehicles:
        light = state.light(vehicle.light_id)
        if not light.is_green or not is_facing(vehicle, light):
            continue
        target = next_position(vehicle.pos, vehicle.orientation)
        if current.is_free(target):
            current = current.with_vehicle(
                Vehicle(vehicle.id, target, vehicle.orientation, vehicle.color, vehicle.light_id)
            )
    return current


def free_directions(state: GridState, pos: Position) -> List[str]:
    """Directions from ``pos`` whose neighbour cell is in bounds and unoccupied"""
    occupied = state.occupied()
    result = []
    for direction in DIRECTIONS:
        target = pos.moved(direction)
        if target.in_bounds(state.grid_size) and target not in occupied:
            result.append(direction)
    return result


def resolve_intervention(state: GridState, iv: Intervention, rng: np.random.Generator) -> Intervention:
    """
    Draw the stochastic part of an intervention up front

    For ``MoveObstacle`` without a direction, one is drawn uniformly from the
    free directions (left as None when the obstacle is boxed in). Other
    interventions are returned as given.
    """
    if isinstance(iv, MoveObstacle) and iv.direction is None:
        obstacle = state.obstacle(iv.obstacle_id)
        options = free_directions(state, obstacle.pos)
        if not options:
            return iv
        return MoveObstacle(iv.obstacle_id, options[int(rng.integers(len(options)))])
    return iv


def apply_intervention(state: GridState, iv: Intervention, rng: np.random.Generator = None) -> GridState:
    """
    Apply one intervention to a state

    Args:
        state: State after the dynamics phase (not mutated)
        iv: Intervention; a MoveObstacle without direction needs ``rng``
        rng: numpy Generator for the obstacle direction draw

    Returns:
        New state

    Raises:
        UnknownEntity: referenced id does not exist
    """
    if isinstance(iv, ToggleLight):
        light = state.light(iv.light_id)
        flipped = "red" if light.is_green else "green"
        return state.with_light(TrafficLight(light.id, light.pos, flipped, light.color))

    if isinstance(iv, MoveObstacle):
        obstacle = state.obstacle(iv.obstacle_id)
        direction = iv.direction
        if direction is None:
            if rng is None:
                raise ValueError("an unresolved MoveObstacle needs an rng")
            direction = resolve_intervention(state, iv, rng).direction
        if direction is None:
            return state
        target = obstacle.pos.moved(direction)
        if not state.is_free(target):
            return state
        return state.with_obstacle(Obstacle(obstacle.id, target, obstacle.color))

    if isinstance(iv, MoveVehicleForward):
        vehicle = state.vehicle(iv.vehicle_id)
        light = state.light(vehicle.light_id)
        if light.is_green:
            return state
        target = next_position(vehicle.pos, vehicle.orientation)
        if not state.is_free(target):
            return state
        return state.with_vehicle(
            Vehicle(vehicle.id, target, vehicle.orientation, vehicle.color, vehicle.light_id)
        )

    return state


def intervention_cycle(state: GridState, iv: Intervention, rng: np.random.Generator = None) -> GridState:
    """Canonical one-timestep transition: dynamics, then the intervention"""
    return apply_intervention(dynamics_step(state), iv, rng)


def valid_interventions(state: GridState, full: bool = False) -> List[Intervention]:
    """
    Interventions available in a state

    Planner mode returns one toggle per light plus Noop. Full mode (data
    generation) adds every obstacle that has a free neighbour cell and every
    vehicle whose forward move is currently legal. Noop is always last.
    """
    actions: List[Intervention] = [ToggleLight(light.id) for light in state.lights]
    if full:
        for obstacle in state.obstacles:
            if free_directions(state, obstacle.pos):
                actions.append(MoveObstacle(obstacle.id))
        for vehicle in state.vehicles:
            light = state.light(vehicle.light_id)
            target = next_position(vehicle.pos, vehicle.orientation)
            if not light.is_green and state.is_free(target):
                actions.append(MoveVehicleForward(vehicle.id))
    actions.append(Noop())
    return actions


def causal_vector(state: GridState) -> np.ndarray:
    """
    Flatten a state into its K causal variables

    Order: per vehicle (x, y), per obstacle (x, y), per light (1.0 green /
    0.0 red). Positions are divided by H-1.
    """
    scale = float(max(state.grid_size - 1, 1))
    values: List[float] = []
    for vehicle in state.vehicles:
        values.extend((vehicle.pos.x / scale, vehicle.pos.y / scale))
    for obstacle in state.obstacles:
        values.extend((obstacle.pos.x / scale, obstacle.pos.y / scale))
    for light in state.lights:
        values.append(1.0 if light.is_green else 0.0)
    return np.asarray(values, dtype=np.float64)
