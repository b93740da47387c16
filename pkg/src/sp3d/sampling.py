"""Farthest-point sampling of initial 3D prompts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadRatio, CountOutOfRange
from .scene_io import PointCloud


@dataclass(frozen=True)
class PromptSet:
    prompt_indices: np.ndarray  # (M,) point-cloud indices; prompt id = position

    @property
    def m(self) -> int:
        return int(self.prompt_indices.size)


def prompt_ratio_to_count(n: int, ratio: float) -> int:
    if not (0 < ratio <= 1):
        raise BadRatio(f"ratio must be in (0, 1], got {ratio}")
    return max(1, int(np.floor(n * ratio + 0.5)))


def farthest_point_sample(cloud: PointCloud, m: int, seed: int = 0) -> PromptSet:
    """Greedy FPS: seeded-uniform first pick, then maximize min distance to the
    selected set; ties broken by smallest index."""
    n = len(cloud)
    if not (1 <= m <= n):
        raise CountOutOfRange(f"m must be in [1, {n}], got {m}")
    pos = cloud.positions
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = first
    min_d2 = np.sum((pos - pos[first]) ** 2, axis=1)
    for k in range(1, m):
        nxt = int(np.argmax(min_d2))  # argmax returns first max: smallest-index ties
        chosen[k] = nxt
        d2 = np.sum((pos - pos[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
    return PromptSet(chosen)
