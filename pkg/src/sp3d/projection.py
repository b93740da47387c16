"""Pinhole projection of world points into frames plus the depth occlusion test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange
from .scene_io import Frame, PointCloud

DEFAULT_OCCLUSION_TOL = 0.05  # meters


@dataclass(frozen=True)
class PixelProjection:
    frame_id: int
    point_index: int
    u: int
    v: int
    cam_depth: float
    valid: bool


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5)).astype(np.int64)


def project_point(p, frame: Frame) -> PixelProjection:
    """Project one world point; validity is a value, never an error."""
    proj = _project_arrays(np.asarray(p, dtype=np.float64).reshape(1, 3), frame)
    u, v, z, valid = (a[0] for a in proj)
    return PixelProjection(frame.id, -1, int(u), int(v), float(z), bool(valid))


def visibility_test(proj: PixelProjection, frame: Frame, tol: float = DEFAULT_OCCLUSION_TOL) -> bool:
    """True iff the frame's depth at (u,v) is valid and matches the point's camera depth."""
    if not proj.valid:
        return False
    d = frame.depth.depth[proj.v, proj.u]
    return d > 0 and abs(proj.cam_depth - d) <= tol


def _project_arrays(points: np.ndarray, frame: Frame):
    """Vectorized core: returns (u, v, cam_depth, valid) arrays."""
    intr = frame.intrinsics
    m = frame.pose.world_to_camera
    cam = points @ m[:3, :3].T + m[:3, 3]
    z = cam[:, 2]
    front = z > 0
    zsafe = np.where(front, z, 1.0)
    uf = intr.fx * cam[:, 0] / zsafe + intr.cx
    vf = intr.fy * cam[:, 1] / zsafe + intr.cy
    u = _round_half_away(uf)
    v = _round_half_away(vf)
    valid = front & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    u = np.where(valid, u, 0)
    v = np.where(valid, v, 0)
    return u, v, z, valid


def project_visible(points: np.ndarray, frame: Frame, tol: float = DEFAULT_OCCLUSION_TOL):
    """Project an (N,3) array; returns (u, v, cam_depth, visible) with the occlusion
    test folded into `visible`."""
    u, v, z, valid = _project_arrays(points, frame)
    d = frame.depth.depth[v, u]
    visible = valid & (d > 0) & (np.abs(z - d) <= tol)
    return u, v, z, visible


def project_batch(indices, cloud: PointCloud, frame: Frame,
                  tol: float = DEFAULT_OCCLUSION_TOL) -> list[PixelProjection]:
    """Batch composition of project_point + visibility_test over cloud indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return []
    n = len(cloud)
    if indices.min() < 0 or indices.max() >= n:
        raise IndexOutOfRange(f"index outside [0,{n})")
    u, v, z, visible = project_visible(cloud.positions[indices], frame, tol)
    return [
        PixelProjection(frame.id, int(idx), int(ui), int(vi), float(zi), bool(vis))
        for idx, ui, vi, zi, vis in zip(indices, u, v, z, visible)
    ]
