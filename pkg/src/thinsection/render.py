"""Grid overlays: cell tints by label plus one-pixel grid lines."""

from __future__ import annotations

import numpy as np

from .grid import CellLabel, CellLabelGrid, DimensionMismatch, GridSpec
from .imgcore import RgbImage, encode_png

TINTS = {
    CellLabel.QUARTZ.value: (0, 0, 255),
    CellLabel.ACCESSORY.value: (255, 0, 0),
}
LINE_COLOUR = (255, 255, 0)


def grid_line_mask(spec: GridSpec) -> np.ndarray:
    """True on the internal cell boundaries (first row/column of each cell)."""
    mask = np.zeros((spec.image_height, spec.image_width), dtype=bool)
    mask[spec.row_starts[1:], :] = True
    mask[:, spec.col_starts[1:]] = True
    return mask


def overlay_pixels(img: RgbImage, cells: CellLabelGrid) -> np.ndarray:
    if cells.cells_x > img.width or cells.cells_y > img.height:
        raise DimensionMismatch(
            f"{cells.cells_x}x{cells.cells_y} cells do not fit a {img.width}x{img.height} image"
        )
    spec = GridSpec(img.width, img.height, cells.cells_x, cells.cells_y)
    out = img.pixels.astype(np.int64)
    for r in range(cells.cells_y):
        for c in range(cells.cells_x):
            tint = TINTS.get(cells.labels[r, c])
            if tint is None:
                continue
            rows, cols = spec.cell_rect(r, c).slices()
            out[rows, cols] = (out[rows, cols] + np.asarray(tint)) // 2
    out[grid_line_mask(spec)] = LINE_COLOUR
    return out.astype(np.uint8)


def render_overlay(img: RgbImage, cells: CellLabelGrid) -> bytes:
    return encode_png(overlay_pixels(img, cells))
