"""2-D projection density images of reach sets.

High-dimensional input boxes are projected onto two chosen axes; each box
contributes its normalized volume along the hidden axes, spread exactly over
the cells its projection overlaps.  Darker pixels mean more hidden-axis
volume, mirroring how reachability results are usually eyeballed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .geometry import Box


def reach_density_grid(
    boxes: Sequence[Box],
    bounding: Box,
    x_var: str,
    y_var: str,
    resolution: int = 128,
) -> np.ndarray:
    """(resolution, resolution) density grid in normalized [0,1]^2 coordinates.

    grid[iy, ix] is the hidden-axis weight per unit area in that cell, so the
    sum of grid * cell_area equals the total weighted projected area.
    """
    if x_var == y_var:
        raise ValueError("need two distinct axes")
    for v in (x_var, y_var):
        if v not in bounding:
            raise KeyError(f"axis {v!r} not in the bounding box")
    grid = np.zeros((resolution, resolution))
    edges = np.linspace(0.0, 1.0, resolution + 1)
    cell = 1.0 / resolution

    def normalized(b: Box, var: str) -> tuple[float, float]:
        ref = bounding[var]
        iv = b[var]
        return (iv.lo - ref.lo) / ref.width, (iv.hi - ref.lo) / ref.width

    for b in boxes:
        weight = 1.0
        for n, iv in b:
            if n in (x_var, y_var):
                continue
            ref = bounding[n]
            if ref.width > 0:
                weight *= iv.width / ref.width
        xlo, xhi = normalized(b, x_var)
        ylo, yhi = normalized(b, y_var)
        # exact overlap length of [lo, hi] with each cell, per axis
        ox = np.clip(np.minimum(xhi, edges[1:]) - np.maximum(xlo, edges[:-1]), 0.0, None)
        oy = np.clip(np.minimum(yhi, edges[1:]) - np.maximum(ylo, edges[:-1]), 0.0, None)
        grid += weight * np.outer(oy, ox) / (cell * cell)
    return grid


def write_pgm(grid: np.ndarray, path) -> None:
    """Grayscale PGM, white background, darker = denser; y axis points up."""
    peak = float(grid.max())
    if peak <= 0.0:
        pixels = np.full(grid.shape, 255, dtype=np.uint8)
    else:
        pixels = np.round(255.0 * (1.0 - grid / peak)).astype(np.uint8)
    flipped = pixels[::-1]  # row 0 of the file is the top of the image
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.shape[1]} {grid.shape[0]}\n255\n".encode())
        fh.write(flipped.tobytes())
