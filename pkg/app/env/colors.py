"""Named colour palette used for entity descriptions"""
from typing import Dict, Sequence, Tuple

import numpy as np

RGB = Tuple[int, int, int]

PALETTE: Dict[str, RGB] = {
    "red": (255, 0, 0),
    "green": (0, 128, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "orange": (255, 165, 0),
    "purple": (128, 0, 128),
    "pink": (255, 192, 203),
    "brown": (139, 69, 19),
    "gray": (128, 128, 128),
    "black": (0, 0, 0),
}

_NAMES = list(PALETTE)
_TABLE = np.array([PALETTE[n] for n in _NAMES], dtype=np.float64)


def color_name(rgb: Sequence[int]) -> str:
    """
    Nearest palette colour by Euclidean RGB distance

    Ties resolve to the earlier palette entry.

    Args:
        rgb: (r, g, b) with components in [0, 255]

    Returns:
        Colour word
    """
    point = np.asarray(rgb, dtype=np.float64)
    distances = np.sum((_TABLE - point) ** 2, axis=1)
    return _NAMES[int(np.argmin(distances))]
