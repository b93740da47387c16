"""Promptable segmentation models behind a single point-prompt interface.

A model takes an RGB frame and one foreground pixel prompt and returns a
boolean mask plus a predicted-IoU score on the 0-100 scale, and optionally a
logit map from which a stability score is derived (the agreement between the
masks thresholded one unit below and above the decision level). Models without
logits report stability 100 and the archive manifest flags the default.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelError


def stability_from_logits(logits: np.ndarray, level: float = 0.0,
                          offset: float = 1.0) -> float:
    """IoU between the masks cut one offset below and above the decision level."""
    loose = logits >= level - offset
    tight = logits >= level + offset
    union = int(np.count_nonzero(loose))
    if union == 0:
        return 0.0
    inter = int(np.count_nonzero(tight))  # tight is a subset of loose
    return 100.0 * inter / union


class MockModel:
    """Fixed square mask centered on the prompt; deterministic scores."""

    name = "mock"
    has_logits = False

    def __init__(self, half_size: int = 4):
        self.half_size = half_size

    def segment(self, rgb: np.ndarray, u: int, v: int):
        h, w = rgb.shape[:2]
        mask = np.zeros((h, w), dtype=bool)
        r = self.half_size
        mask[max(0, v - r):min(h, v + r + 1), max(0, u - r):min(w, u + r + 1)] = True
        return mask, 90.0, None


class FloodFillModel:
    """Classical promptable segmenter: grow a region of similar color around
    the prompt pixel, scored by how sharply the region boundary contrasts."""

    name = "flood"
    has_logits = True

    def __init__(self, tolerance: float = 24.0):
        self.tolerance = tolerance

    def segment(self, rgb: np.ndarray, u: int, v: int):
        img = rgb.astype(np.float64)
        h, w = img.shape[:2]
        seed = img[v, u]
        dist = np.linalg.norm(img - seed, axis=2)
        similar = dist <= self.tolerance
        # connected component containing the seed, 4-neighborhood flood fill
        mask = np.zeros((h, w), dtype=bool)
        stack = [(v, u)]
        while stack:
            y, x = stack.pop()
            if mask[y, x] or not similar[y, x]:
                continue
            mask[y, x] = True
            if y > 0:
                stack.append((y - 1, x))
            if y + 1 < h:
                stack.append((y + 1, x))
            if x > 0:
                stack.append((y, x - 1))
            if x + 1 < w:
                stack.append((y, x + 1))
        # pseudo-logits: positive inside the tolerance band, scaled to +-3
        logits = np.where(mask, 1.0 - dist / max(self.tolerance, 1e-9), -dist / 255.0) * 3.0
        coverage = mask.mean()
        predicted_iou = float(np.clip(95.0 - 60.0 * coverage, 0.0, 100.0))
        return mask, predicted_iou, logits


MODELS = {
    "mock": MockModel,
    "flood": FloodFillModel,
}


def load_model(name: str):
    try:
        return MODELS[name]()
    except KeyError:
        raise ModelError(f"unknown model {name!r}; available: {sorted(MODELS)}")
