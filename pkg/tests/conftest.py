"""Shared fixtures: tiny synthetic scenes kept small enough for fast tests."""

import math

import numpy as np
import pytest

from sp3d.scene_io import CameraIntrinsics
from sp3d.synthetic import Primitive, SceneSpec, emit_dataset, look_at

TINY_INTRINSICS = CameraIntrinsics(60.0, 60.0, 40.0, 30.0, 80, 60)


def tiny_scene_spec(seed: int = 0, n_frames: int = 8, density: float = 250.0) -> SceneSpec:
    """A floor with two well-separated floating objects, low-res cameras."""
    prims = [
        Primitive("plane", (0.0, 0.0, 0.0), (4.0, 4.0), 0),
        Primitive("sphere", (-1.0, 0.0, 1.0), (0.35,), 1),
        Primitive("box", (1.0, 0.0, 1.0), (0.5, 0.5, 0.5), 2),
    ]
    cams = []
    for i in range(n_frames):
        ang = 2 * math.pi * i / n_frames
        height, tz = (2.4, 0.6) if i % 2 == 0 else (0.5, 1.0)
        eye = (2.8 * math.cos(ang), 2.8 * math.sin(ang), height)
        cams.append(look_at(eye, (0.0, 0.0, tz)))
    return SceneSpec("tiny", (5.0, 5.0, 3.0), prims, density, cams,
                     intrinsics=TINY_INTRINSICS, seed=seed)


@pytest.fixture(scope="session")
def tiny_scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_scene")
    emit_dataset(tiny_scene_spec(), out)
    return out


@pytest.fixture(scope="session")
def tiny_scene(tiny_scene_dir):
    from sp3d.scene_io import load_frame_manifest, load_labels, load_point_cloud

    cloud = load_point_cloud(tiny_scene_dir / "cloud.ply")
    frames = load_frame_manifest(tiny_scene_dir)
    gt = load_labels(tiny_scene_dir / "gt.labels.bin")
    return cloud, frames, gt


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for criterion, passed, detail in test_acceptance.RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {criterion}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


def random_pose(rng):
    """A random rigid world-to-camera transform via QR orthonormalization."""
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    m = np.eye(4)
    m[:3, :3] = q
    m[:3, 3] = rng.uniform(-2, 2, 3)
    from sp3d.scene_io import CameraPose

    return CameraPose(m)
