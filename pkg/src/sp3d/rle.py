"""Run-length codec for binary mask rasters.

Encoding is a list of alternating run lengths over the row-major flattened
raster, always starting with a 0-run (which may be empty).
"""

from __future__ import annotations

import numpy as np

from .errors import RleOverrun


def rle_encode(raster: np.ndarray) -> np.ndarray:
    flat = np.asarray(raster, dtype=bool).ravel()
    if flat.size == 0:
        return np.zeros(0, dtype=np.uint32)
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], edges, [flat.size]))
    runs = np.diff(starts)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return runs.astype(np.uint32)


def rle_decode(runs: np.ndarray, width: int, height: int) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    total = int(runs.sum())
    if total != width * height:
        raise RleOverrun(f"runs sum to {total}, raster holds {width * height}")
    flat = np.zeros(width * height, dtype=bool)
    ends = np.cumsum(runs)
    starts = ends - runs
    for i in range(1, runs.size, 2):
        flat[starts[i]:ends[i]] = True
    return flat.reshape(height, width)
