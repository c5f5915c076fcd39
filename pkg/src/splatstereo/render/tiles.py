"""Tile binning and depth ordering for the software rasterizer.

Each surviving splat is assigned to every tile its footprint's axis-aligned
bound overlaps. Entries within a tile are depth-ascending with ties broken
by input index, which equals a global stable depth sort filtered to that
tile; that property makes per-tile blending match untiled per-pixel
blending exactly.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import InvalidInputError

TILE_SIZE = 16


@dataclass(frozen=True)
class TileBins:
    """CSR-style per-tile entry lists over the projected cloud."""

    tile_size: int
    tiles_x: int
    tiles_y: int
    offsets: np.ndarray  # (tiles_x * tiles_y + 1,) int64
    gaussian_index: np.ndarray  # (entries,) int32, depth-ordered per tile

    @property
    def entry_count(self) -> int:
        return len(self.gaussian_index)

    def tile_entries(self, tx: int, ty: int) -> np.ndarray:
        t = ty * self.tiles_x + tx
        return self.gaussian_index[self.offsets[t] : self.offsets[t + 1]]


@njit(cache=True, nogil=True)
def _count_and_fill(order, means2d, radii, tile_size, tiles_x, tiles_y, width, height):
    n_tiles = tiles_x * tiles_y
    counts = np.zeros(n_tiles + 1, np.int64)
    n = len(order)
    rects = np.empty((n, 4), np.int32)
    for k in range(n):
        g = order[k]
        # pixel centers (j + 0.5) covered by [mean - r, mean + r]
        x0 = int(np.ceil(means2d[g, 0] - radii[g, 0] - 0.5))
        x1 = int(np.floor(means2d[g, 0] + radii[g, 0] - 0.5))
        y0 = int(np.ceil(means2d[g, 1] - radii[g, 1] - 0.5))
        y1 = int(np.floor(means2d[g, 1] + radii[g, 1] - 0.5))
        tx0 = max(0, x0 // tile_size)
        tx1 = min(tiles_x - 1, x1 // tile_size)
        ty0 = max(0, y0 // tile_size)
        ty1 = min(tiles_y - 1, y1 // tile_size)
        rects[k, 0] = tx0
        rects[k, 1] = tx1
        rects[k, 2] = ty0
        rects[k, 3] = ty1
        if tx1 < tx0 or ty1 < ty0:
            continue
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                counts[ty * tiles_x + tx + 1] += 1
    offsets = np.cumsum(counts)
    cursor = offsets[:-1].copy()
    entries = np.empty(offsets[-1], np.int32)
    for k in range(n):
        tx0, tx1, ty0, ty1 = rects[k, 0], rects[k, 1], rects[k, 2], rects[k, 3]
        if tx1 < tx0 or ty1 < ty0:
            continue
        g = order[k]
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                t = ty * tiles_x + tx
                entries[cursor[t]] = g
                cursor[t] += 1
    return offsets, entries


def bin_and_sort(projected, width: int, height: int, tile_size: int = TILE_SIZE) -> TileBins:
    """Bin a ProjectedCloud into depth-sorted tile lists."""
    if tile_size < 4:
        raise InvalidInputError(f"tile_size must be >= 4, got {tile_size}")
    tiles_x = (width + tile_size - 1) // tile_size
    tiles_y = (height + tile_size - 1) // tile_size

    idx = np.flatnonzero(projected.valid)
    # stable sort on depth keeps input order for ties; positive IEEE floats
    # are order-isomorphic to their unsigned bit patterns, and integer keys
    # take numpy's radix path
    depths = np.ascontiguousarray(projected.depth[idx])
    if depths.dtype == np.float32:
        keys = depths.view(np.uint32)
    elif depths.dtype == np.float64:
        keys = depths.view(np.uint64)
    else:
        keys = depths
    order = np.ascontiguousarray(idx[np.argsort(keys, kind="stable")])
    offsets, entries = _count_and_fill(
        order,
        projected.means2d,
        projected.radii,
        tile_size,
        tiles_x,
        tiles_y,
        width,
        height,
    )
    return TileBins(
        tile_size=tile_size,
        tiles_x=tiles_x,
        tiles_y=tiles_y,
        offsets=offsets,
        gaussian_index=entries,
    )
