"""
Rule-based state descriptions

    "The blue car is at (2,3), the gray obstacle is at (6,6), the cyan traffic light is green"

Vehicles first, then obstacles, then lights, in catalog order. ``parse_state``
reads the same surface form back.
"""
import re
from typing import List, Optional, Sequence

import numpy as np

from app.env.catalog import EntityCatalog, denormalize_cell, state_from_causal
from app.env.entities import GridState
from app.errors import DataError, DimensionError

_CLAUSE = re.compile(
    r"the (?P<color>[a-z]+) (?P<noun>car|obstacle|traffic light) is "
    r"(?:at \((?P<x>-?\d+),\s*(?P<y>-?\d+)\)|(?P<light>green|red))"
)
_NOUN_KIND = {"car": "vehicle", "obstacle": "obstacle", "traffic light": "light"}


def describe_state(causal: Sequence[float], catalog: EntityCatalog) -> str:
    """
    Render a (possibly estimated) causal vector as one sentence

    Positions are denormalised to integer cells (nearest, ties toward zero,
    clipped to the grid); light values >= 0.5 read as green.
    """
    causal = np.asarray(causal, dtype=np.float64)
    if causal.shape != (catalog.K,):
        raise DimensionError(f"causal vector has shape {causal.shape}, expected ({catalog.K},)")
    H = catalog.grid_size
    clauses: List[str] = []
    i = 0
    for entity in (*catalog.vehicles, *catalog.obstacles):
        x, y = denormalize_cell(causal[i], H), denormalize_cell(causal[i + 1], H)
        clauses.append(f"the {entity.label} is at ({x},{y})")
        i += 2
    for entity in catalog.lights:
        clauses.append(f"the {entity.label} is {'green' if causal[i] >= 0.5 else 'red'}")
        i += 1
    if not clauses:
        return ""
    text = ", ".join(clauses)
    return text[0].upper() + text[1:]


def parse_causal(text: str, catalog: EntityCatalog) -> np.ndarray:
    """
    Read a state description back into a normalised causal vector

    Raises:
        DataError: an entity of the catalog is not mentioned, or a colour is unknown
    """
    scale = float(max(catalog.grid_size - 1, 1))
    values = {}
    for match in _CLAUSE.finditer(text.lower()):
        kind = _NOUN_KIND[match.group("noun")]
        entity = catalog.find(kind, match.group("color"))
        if entity is None:
            raise DataError(f"description mentions an unknown {match.group('color')} {match.group('noun')}")
        if match.group("light"):
            values[(kind, entity.id)] = (1.0 if match.group("light") == "green" else 0.0,)
        else:
            values[(kind, entity.id)] = (int(match.group("x")) / scale, int(match.group("y")) / scale)

    out: List[float] = []
    for entity in catalog.entities():
        key = (entity.kind, entity.id)
        if key not in values:
            raise DataError(f"description does not mention the {entity.label}")
        out.extend(values[key])
    return np.asarray(out, dtype=np.float64)


def parse_state(text: str, template: GridState, catalog: Optional[EntityCatalog] = None) -> GridState:
    """Inverse of ``describe_state``; immutable parts come from ``template``"""
    catalog = catalog or EntityCatalog.from_state(template)
    return state_from_causal(template, parse_causal(text, catalog))
