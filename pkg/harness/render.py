"""
Heatmap rendering of imaging results (Pillow, written as PPM)
"""

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from loguru import logger

from src.imaging import ImagingResult
from src.medium_geom import SurfaceProfile

# anchor colours, interpolated linearly over [0, 1]
PALETTES = {
    'heat': ((0, 0, 0), (128, 0, 0), (255, 64, 0), (255, 200, 0), (255, 255, 255)),
    'gray': ((0, 0, 0), (255, 255, 255)),
    'ocean': ((8, 16, 48), (0, 90, 160), (60, 180, 200), (230, 250, 250)),
}
TRUE_CURVE = (0, 255, 0)
ARGMAX_CURVE = (0, 160, 255)


def colorize(values: np.ndarray, palette: str = 'heat') -> np.ndarray:
    """Map values in [0, 1] to uint8 RGB through the palette anchors"""
    anchors = np.asarray(PALETTES[palette], dtype=float)
    positions = np.linspace(0.0, 1.0, len(anchors))
    v = np.clip(values, 0.0, 1.0)
    rgb = np.stack([np.interp(v, positions, anchors[:, c]) for c in range(3)], axis=-1)
    return np.round(rgb).astype(np.uint8)


def _row_of(z2: np.ndarray, grid_z2: np.ndarray) -> np.ndarray:
    """Image row (top = largest z2) of the nearest grid height"""
    idx = np.rint((z2 - grid_z2[0]) / (grid_z2[-1] - grid_z2[0]) * (len(grid_z2) - 1)).astype(int)
    return len(grid_z2) - 1 - idx


def heatmap_array(result: ImagingResult, profile: Optional[SurfaceProfile] = None, palette: str = 'heat',
                  show_argmax: bool = True) -> np.ndarray:
    """(G2, G1, 3) uint8 image, z2 increasing upwards, linear scale from 0 to the grid maximum"""
    values = result.values
    peak = float(values.max())
    scaled = values / peak if peak > 0 else np.zeros_like(values)
    image = colorize(scaled.T[::-1], palette)

    grid = result.grid
    columns = np.arange(grid.G1)
    if profile is not None:
        rows = _row_of(np.asarray(profile.eval(grid.z1), dtype=float), grid.z2)
        inside = (rows >= 0) & (rows < grid.G2)
        image[rows[inside], columns[inside]] = TRUE_CURVE
    if show_argmax:
        _, z2_hat = result.argmax_curve()
        image[_row_of(z2_hat, grid.z2), columns] = ARGMAX_CURVE
    return image


def render_heatmap(result: ImagingResult, path, profile: Optional[SurfaceProfile] = None,
                   palette: str = 'heat', scale: int = 3, show_argmax: bool = True) -> Path:
    """Write the heatmap as a portable pixmap; identical inputs give identical bytes"""
    if palette not in PALETTES:
        raise ValueError(f"unknown palette '{palette}' (known: {', '.join(PALETTES)})")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image = Image.fromarray(heatmap_array(result, profile, palette, show_argmax))
    if scale > 1:
        image = image.resize((image.width * scale, image.height * scale), Image.Resampling.NEAREST)
    image.save(path, format='PPM')
    logger.info(f"Heatmap written: {path} ({image.width}x{image.height})")
    return path
