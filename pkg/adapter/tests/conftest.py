"""Shared fixtures: a tiny three-frame RGB scene with exported prompts."""

import numpy as np
import pytest
from PIL import Image

from samadapter.prompts import FramePrompts, save_frame_prompts

WIDTH, HEIGHT = 64, 48


def paint_frame(rng):
    """Flat gray background with two solid color blobs."""
    rgb = np.full((HEIGHT, WIDTH, 3), 200, dtype=np.uint8)
    rgb[10:30, 8:24] = (220, 40, 40)
    rgb[20:40, 36:56] = (40, 40, 220)
    rgb += rng.integers(0, 3, rgb.shape, dtype=np.uint8)
    return rgb


@pytest.fixture(scope="session")
def three_frame_scene(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    frames = root / "frames"
    prompts = root / "prompts"
    frames.mkdir()
    prompts.mkdir()
    rng = np.random.default_rng(7)
    for fid in range(3):
        Image.fromarray(paint_frame(rng)).save(frames / f"{fid}.rgb.png")
        fp = FramePrompts(fid, WIDTH, HEIGHT,
                          [(0, 16, 20), (1, 46, 30), (2, 60, 4)])
        save_frame_prompts(fp, prompts / f"{fid}.prompts.json")
    return root
