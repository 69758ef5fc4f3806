import logging
from functools import lru_cache
from typing import Optional, Set

from app.env.catalog import NOUNS
from app.env.colors import PALETTE
from app.env.dynamics import valid_interventions
from app.env.entities import GridState, Intervention, MoveObstacle, MoveVehicleForward, Noop, ToggleLight
from app.text.grammar import Pcfg, target_kind, target_color
from app.text.tokenizer import normalize

logger = logging.getLogger(__name__)

_NOUN_TOKENS = {"car": "vehicle", "obstacle": "obstacle", "traffic": "light", "light": "light"}


@lru_cache(maxsize=1)
def _default_pcfg() -> Pcfg:
    return Pcfg()


def _verb_sets(pcfg: Optional[Pcfg]):
    pcfg = pcfg or _default_pcfg()
    toggles: Set[str] = {"toggled", "toggle"} | set(pcfg.verbs[ToggleLight.kind])
    moves: Set[str] = {"moved", "move"} | set(pcfg.verbs[MoveObstacle.kind]) | set(pcfg.verbs[MoveVehicleForward.kind])
    return toggles, moves


def parse_action(text: str, state: GridState, pcfg: Optional[Pcfg] = None) -> Intervention:
    """
    Map free-form action text to an intervention valid in ``state``

    Keyword matching on the noun, the colour word and the verb class against
    the full-mode valid set. Unmatched, conflicting or ambiguous text maps to
    Noop.

    Args:
        text: Action description (canonical, PCFG-generated or free-form)
        state: State the action would be applied to
        pcfg: Grammar whose verbs are recognised (default grammar if None)

    Returns:
        Matched intervention or Noop
    """
    tokens = normalize(text)
    kinds = {_NOUN_TOKENS[t] for t in tokens if t in _NOUN_TOKENS}
    if len(kinds) != 1:
        return Noop()
    kind = kinds.pop()

    colors = {t for t in tokens if t in PALETTE}
    if len(colors) != 1:
        return Noop()
    color = colors.pop()

    toggles, moves = _verb_sets(pcfg)
    said_toggle = any(t in toggles for t in tokens)
    said_move = any(t in moves for t in tokens)
    if said_toggle and said_move:
        return Noop()
    if said_toggle and kind != "light":
        return Noop()
    if said_move and kind == "light":
        return Noop()

    matches = [
        iv for iv in valid_interventions(state, full=True)
        if not isinstance(iv, Noop) and target_kind(iv) == kind and target_color(iv, state) == color
    ]
    if len(matches) != 1:
        logger.debug(f"[parse] no unique {color} {NOUNS[kind]} action for {text!r}")
        return Noop()
    return matches[0]
