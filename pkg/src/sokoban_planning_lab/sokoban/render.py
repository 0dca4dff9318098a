"""
RGB observation rendering, one pixel per square.
"""

from typing import Dict, Sequence, Tuple

import numpy as np

from .level import Level, Tile

RGB = Tuple[int, int, int]

PALETTE: Dict[Tile, RGB] = {
    Tile.WALL: (0, 0, 0),
    Tile.FLOOR: (243, 248, 238),
    Tile.AGENT: (160, 212, 56),
    Tile.AGENT_ON_TARGET: (219, 212, 56),
    Tile.BOX: (142, 121, 56),
    Tile.BOX_ON_TARGET: (254, 95, 56),
    Tile.TARGET: (254, 126, 125),
}

_BY_COLOR: Dict[RGB, Tile] = {color: tile for tile, color in PALETTE.items()}


def tile_color(tile: Tile) -> np.ndarray:
    return np.asarray(PALETTE[tile], dtype=np.float64) / 255.0


def render_rgb(level: Level) -> np.ndarray:
    """Render a level as an H×W×3 array with components in [0, 1]."""
    image = np.zeros((level.height, level.width, 3), dtype=np.float64)
    for r in range(level.height):
        for c in range(level.width):
            image[r, c] = tile_color(level.tile((r, c)))
    return image


def classify_pixel(rgb: Sequence[float]) -> Tile:
    """Map a rendered pixel back to its tile kind."""
    key = tuple(int(round(float(v) * 255.0)) for v in rgb)
    try:
        return _BY_COLOR[key]  # type: ignore[index]
    except KeyError:
        raise ValueError(f"Pixel {tuple(rgb)} is not in the palette")


def classify_image(image: np.ndarray) -> list:
    """Tile grid for a rendered observation."""
    return [[classify_pixel(image[r, c]) for c in range(image.shape[1])] for r in range(image.shape[0])]
