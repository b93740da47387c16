"""Analytic synthetic scenes: primitive surfaces sampled into labeled point
clouds and ray-cast into exact depth / instance-id rasters.

These scenes are the ground-truth substrate for the oracle mask provider and
the verification suite; no mesh or photorealistic rendering is involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegeneratePrimitive, IoError
from .masks import BACKGROUND, save_instance_raster
from .scene_io import (
    CameraIntrinsics,
    CameraPose,
    PointCloud,
    save_depth,
    save_intrinsics,
    save_labels,
    save_point_cloud,
    save_pose,
    DepthMap,
)

_EPS = 1e-9
DEFAULT_INTRINSICS = CameraIntrinsics(200.0, 200.0, 160.0, 120.0, 320, 240)


@dataclass(frozen=True)
class Primitive:
    kind: str  # box | sphere | cylinder | plane
    center: tuple[float, float, float]
    dims: tuple[float, ...]  # box: sx,sy,sz; sphere: r; cylinder: r,h; plane: sx,sy
    instance_id: int

    def area(self) -> float:
        if self.kind == "box":
            sx, sy, sz = self.dims
            return 2 * (sx * sy + sx * sz + sy * sz)
        if self.kind == "sphere":
            return 4 * math.pi * self.dims[0] ** 2
        if self.kind == "cylinder":
            r, h = self.dims
            return 2 * math.pi * r * h + 2 * math.pi * r * r
        if self.kind == "plane":
            return self.dims[0] * self.dims[1]
        raise DegeneratePrimitive(f"unknown primitive kind {self.kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    name: str
    extents: tuple[float, float, float]
    primitives: list[Primitive]
    points_per_m2: float
    cameras: list[CameraPose]
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    seed: int = 0


@dataclass
class RenderedFrame:
    depth: np.ndarray  # (H, W) float meters, 0 where no hit
    instance_ids: np.ndarray  # (H, W) uint32, BACKGROUND where no hit


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> CameraPose:
    """World-to-camera pose with +z forward, +y down in image coordinates."""
    eye = np.asarray(eye, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - eye
    f /= np.linalg.norm(f)
    x = np.cross(f, np.asarray(up, dtype=np.float64))
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        x = np.cross(f, (0.0, 1.0, 0.0))
        nx = np.linalg.norm(x)
    x /= nx
    y = np.cross(f, x)
    r = np.stack([x, y, f])
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = -r @ eye
    return CameraPose(m)


# ---------------------------------------------------------------------------
# surface sampling


def _sample_rect(rng, n, sx, sy):
    pts = np.zeros((n, 3))
    pts[:, 0] = rng.uniform(-sx / 2, sx / 2, n)
    pts[:, 1] = rng.uniform(-sy / 2, sy / 2, n)
    return pts


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    raw = weights / weights.sum() * total
    counts = np.floor(raw).astype(int)
    rem = total - counts.sum()
    order = np.argsort(-(raw - counts))
    counts[order[:rem]] += 1
    return counts


def _sample_primitive(prim: Primitive, n: int, rng) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 3))
    c = np.asarray(prim.center)
    if prim.kind == "plane":
        return _sample_rect(rng, n, *prim.dims) + c
    if prim.kind == "sphere":
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * prim.dims[0] + c
    if prim.kind == "box":
        sx, sy, sz = prim.dims
        face_areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
        counts = _largest_remainder(face_areas, n)
        out = []
        for face, cnt in enumerate(counts):
            p = np.zeros((cnt, 3))
            axis = face // 2
            sign = 1.0 if face % 2 == 0 else -1.0
            others = [a for a in range(3) if a != axis]
            half = [sx / 2, sy / 2, sz / 2]
            p[:, axis] = sign * half[axis]
            for a in others:
                p[:, a] = rng.uniform(-half[a], half[a], cnt)
            out.append(p)
        return np.concatenate(out) + c
    if prim.kind == "cylinder":
        r, h = prim.dims
        lateral = 2 * math.pi * r * h
        cap = math.pi * r * r
        counts = _largest_remainder(np.array([lateral, cap, cap]), n)
        parts = []
        ang = rng.uniform(0, 2 * math.pi, counts[0])
        z = rng.uniform(-h / 2, h / 2, counts[0])
        parts.append(np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=1))
        for sign, cnt in ((1.0, counts[1]), (-1.0, counts[2])):
            ang = rng.uniform(0, 2 * math.pi, cnt)
            rad = r * np.sqrt(rng.uniform(0, 1, cnt))
            parts.append(np.stack([rad * np.cos(ang), rad * np.sin(ang),
                                   np.full(cnt, sign * h / 2)], axis=1))
        return np.concatenate(parts) + c
    raise DegeneratePrimitive(f"unknown primitive kind {prim.kind!r}")


def sample_cloud(spec: SceneSpec) -> tuple[PointCloud, np.ndarray]:
    """Uniform area-weighted surface sampling; returns (cloud, gt instance ids)."""
    pts = []
    labels = []
    for prim in spec.primitives:
        area = prim.area()
        if area <= 0:
            raise DegeneratePrimitive(f"instance {prim.instance_id} has zero area")
        n = max(1, int(round(area * spec.points_per_m2)))
        rng = np.random.default_rng([spec.seed, prim.instance_id])
        pts.append(_sample_primitive(prim, n, rng))
        labels.append(np.full(n, prim.instance_id, dtype=np.uint32))
    return PointCloud(np.concatenate(pts)), np.concatenate(labels)


# ---------------------------------------------------------------------------
# ray casting


def _ray_plane(o, d, sx, sy):
    t = np.full(d.shape[0], np.inf)
    dz = d[:, 2]
    ok = np.abs(dz) > _EPS
    tc = np.where(ok, -o[2] / np.where(ok, dz, 1.0), np.inf)
    px = o[0] + tc * d[:, 0]
    py = o[1] + tc * d[:, 1]
    hit = ok & (tc > _EPS) & (np.abs(px) <= sx / 2) & (np.abs(py) <= sy / 2)
    t[hit] = tc[hit]
    return t


def _ray_box(o, d, sx, sy, sz):
    half = np.array([sx / 2, sy / 2, sz / 2])
    tmin = np.full(d.shape[0], -np.inf)
    tmax = np.full(d.shape[0], np.inf)
    miss = np.zeros(d.shape[0], dtype=bool)
    for a in range(3):
        da = d[:, a]
        par = np.abs(da) <= _EPS
        miss |= par & (np.abs(o[a]) > half[a])
        das = np.where(par, 1.0, da)
        t1 = (-half[a] - o[a]) / das
        t2 = (half[a] - o[a]) / das
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        tmin = np.where(par, tmin, np.maximum(tmin, lo))
        tmax = np.where(par, tmax, np.minimum(tmax, hi))
    t = np.where(tmin > _EPS, tmin, tmax)
    hit = ~miss & (tmax >= tmin) & (t > _EPS)
    return np.where(hit, t, np.inf)


def _ray_sphere(o, d, r):
    a = np.sum(d * d, axis=1)
    b = 2 * d @ o
    c = o @ o - r * r
    disc = b * b - 4 * a * c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t1 = (-b - sq) / (2 * a)
    t2 = (-b + sq) / (2 * a)
    t = np.where(t1 > _EPS, t1, t2)
    return np.where(ok & (t > _EPS), t, np.inf)


def _ray_cylinder(o, d, r, h):
    # lateral surface
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2 * (o[0] * d[:, 0] + o[1] * d[:, 1])
    c = o[0] ** 2 + o[1] ** 2 - r * r
    disc = b * b - 4 * a * c
    ok = (disc >= 0) & (a > _EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    asafe = np.where(a > _EPS, a, 1.0)
    best = np.full(d.shape[0], np.inf)
    for tc in ((-b - sq) / (2 * asafe), (-b + sq) / (2 * asafe)):
        z = o[2] + tc * d[:, 2]
        hit = ok & (tc > _EPS) & (np.abs(z) <= h / 2)
        best = np.where(hit & (tc < best), tc, best)
    # caps
    dz = d[:, 2]
    okz = np.abs(dz) > _EPS
    dzs = np.where(okz, dz, 1.0)
    for zcap in (h / 2, -h / 2):
        tc = (zcap - o[2]) / dzs
        px = o[0] + tc * d[:, 0]
        py = o[1] + tc * d[:, 1]
        hit = okz & (tc > _EPS) & (px * px + py * py <= r * r)
        best = np.where(hit & (tc < best), tc, best)
    return best


def render_frame(spec: SceneSpec, pose: CameraPose,
                 intrinsics: CameraIntrinsics | None = None) -> RenderedFrame:
    """Exact per-pixel nearest-hit depth and instance ids; no z-buffer quantization."""
    intr = intrinsics or spec.intrinsics
    w, h = intr.width, intr.height
    us, vs = np.meshgrid(np.arange(w), np.arange(h))
    dirs_cam = np.stack([
        (us.ravel() - intr.cx) / intr.fx,
        (vs.ravel() - intr.cy) / intr.fy,
        np.ones(w * h),
    ], axis=1)
    c2w = pose.camera_to_world()
    origin = c2w[:3, 3]
    dirs = dirs_cam @ c2w[:3, :3].T
    best_t = np.full(w * h, np.inf)
    best_id = np.full(w * h, BACKGROUND, dtype=np.uint32)
    for prim in spec.primitives:
        o = origin - np.asarray(prim.center)
        if prim.kind == "plane":
            t = _ray_plane(o, dirs, *prim.dims)
        elif prim.kind == "box":
            t = _ray_box(o, dirs, *prim.dims)
        elif prim.kind == "sphere":
            t = _ray_sphere(o, dirs, prim.dims[0])
        elif prim.kind == "cylinder":
            t = _ray_cylinder(o, dirs, *prim.dims)
        else:
            raise DegeneratePrimitive(f"unknown primitive kind {prim.kind!r}")
        closer = t < best_t
        best_t[closer] = t[closer]
        best_id[closer] = prim.instance_id
    depth = np.where(np.isfinite(best_t), best_t, 0.0).reshape(h, w)
    return RenderedFrame(depth, best_id.reshape(h, w))


# ---------------------------------------------------------------------------
# dataset emission


def emit_dataset(spec: SceneSpec, out_dir) -> None:
    """Write the scene in the pipeline's on-disk formats: PLY cloud, GT labels,
    intrinsics, per-frame pose/depth/instance-id files, and a scene manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(str(e))
    cloud, gt = sample_cloud(spec)
    save_point_cloud(cloud, out / "cloud.ply")
    save_labels(gt, out / "gt.labels.bin")
    save_intrinsics(spec.intrinsics, out / "intrinsics.txt")
    for fid, pose in enumerate(spec.cameras):
        rendered = render_frame(spec, pose)
        save_pose(pose, out / f"{fid}.pose.txt")
        save_depth(DepthMap(spec.intrinsics.width, spec.intrinsics.height, rendered.depth),
                   out / f"{fid}.depth.png")
        save_instance_raster(rendered.instance_ids, out / f"{fid}.inst.bin")
    meta = {
        "name": spec.name,
        "seed": spec.seed,
        "points": len(cloud),
        "instances": sorted(int(i) for i in np.unique(gt)),
        "frames": len(spec.cameras),
        "points_per_m2": spec.points_per_m2,
    }
    (out / "scene.json").write_text(json.dumps(meta, indent=2))


# ---------------------------------------------------------------------------
# canonical fixture scenes


def _orbit(n, radius, height, target, phase=0.0):
    poses = []
    for i in range(n):
        ang = 2 * math.pi * i / n + phase
        eye = (radius * math.cos(ang), radius * math.sin(ang), height)
        poses.append(look_at(eye, target))
    return poses


def room8_spec(seed: int = 0, n_frames: int = 40, density: float = 1000.0) -> SceneSpec:
    """Eight well-separated floating objects over a square floor, full visibility."""
    prims = [Primitive("plane", (0.0, 0.0, 0.0), (6.0, 6.0), 0)]
    kinds = ["box", "sphere", "cylinder"]
    for k in range(8):
        ang = 2 * math.pi * k / 8
        center = (1.8 * math.cos(ang), 1.8 * math.sin(ang), 1.0)
        kind = kinds[k % 3]
        dims = {"box": (0.5, 0.5, 0.5), "sphere": (0.3,), "cylinder": (0.25, 0.5)}[kind]
        prims.append(Primitive(kind, center, dims, k + 1))
    # interleave a high ring (sees the floor) and a low ring (sees undersides)
    cams = []
    for i in range(n_frames):
        ang = 2 * math.pi * i / n_frames
        if i % 2 == 0:
            eye = (3.4 * math.cos(ang), 3.4 * math.sin(ang), 2.6)
            cams.append(look_at(eye, (0.0, 0.0, 0.7)))
        else:
            eye = (3.4 * math.cos(ang), 3.4 * math.sin(ang), 0.45)
            cams.append(look_at(eye, (0.0, 0.0, 1.1)))
    return SceneSpec("room-8", (7.0, 7.0, 3.5), prims, density, cams, seed=seed)


def big_floor_spec(seed: int = 0, n_frames: int = 32, density: float = 1200.0) -> SceneSpec:
    """A long floor no single frame can cover, plus one box near each end."""
    prims = [
        Primitive("plane", (0.0, 0.0, 0.0), (10.0, 3.0), 0),
        Primitive("box", (-3.5, 0.0, 1.0), (0.6, 0.6, 0.4), 1),
        Primitive("box", (3.5, 0.0, 1.0), (0.6, 0.6, 0.4), 2),
    ]
    cams = []
    for i in range(n_frames):
        x = -4.2 + 8.4 * i / (n_frames - 1)
        cams.append(look_at((x, 0.0, 2.2), (x + 0.8, 0.0, 0.0)))
    return SceneSpec("big-floor", (11.0, 4.0, 3.0), prims, density, cams, seed=seed)


def clutter_table_spec(seed: int = 0, n_frames: int = 40, density: float = 1200.0) -> SceneSpec:
    """A floor, a table slab, and 12 tiny well-separated floating objects."""
    prims = [
        Primitive("plane", (0.0, 0.0, 0.0), (5.0, 4.0), 0),
        Primitive("box", (0.0, 0.0, 0.8), (1.6, 1.0, 0.1), 1),
    ]
    iid = 2
    xs = [-0.6, -0.2, 0.2, 0.6]
    for xi, x in enumerate(xs):
        for y in (-0.3, 0.3):
            kind = "sphere" if (xi + (y > 0)) % 2 == 0 else "box"
            dims = (0.09,) if kind == "sphere" else (0.12, 0.12, 0.12)
            prims.append(Primitive(kind, (x, y, 1.5), dims, iid))
            iid += 1
    for x, y in ((-1.7, -1.3), (1.7, -1.3), (-1.7, 1.3), (1.7, 1.3)):
        prims.append(Primitive("sphere", (x, y, 0.8), (0.09,), iid))
        iid += 1
    cams = []
    for i in range(n_frames):
        ang = 2 * math.pi * i / n_frames
        height, target_z = (2.8, 0.8) if i % 2 == 0 else (1.6, 1.1)
        eye = (3.6 * math.cos(ang), 3.6 * math.sin(ang), height)
        cams.append(look_at(eye, (0.0, 0.0, target_z)))
    return SceneSpec("clutter-table", (6.0, 5.0, 3.5), prims, density, cams, seed=seed)


CANONICAL_SCENES = {
    "room-8": room8_spec,
    "big-floor": big_floor_spec,
    "clutter-table": clutter_table_spec,
}


def spec_from_json(path) -> SceneSpec:
    cfg = json.loads(Path(path).read_text())
    prims = [
        Primitive(p["kind"], tuple(p["center"]), tuple(p["dims"]), int(p["id"]))
        for p in cfg["primitives"]
    ]
    cams = [look_at(c["eye"], c["target"]) for c in cfg["cameras"]]
    intr = DEFAULT_INTRINSICS
    if "intrinsics" in cfg:
        ic = cfg["intrinsics"]
        intr = CameraIntrinsics(ic["fx"], ic["fy"], ic["cx"], ic["cy"],
                                int(ic["width"]), int(ic["height"]))
    return SceneSpec(cfg.get("name", "custom"), tuple(cfg.get("extents", (10, 10, 5))),
                     prims, float(cfg.get("points_per_m2", 1000.0)), cams, intr,
                     int(cfg.get("seed", 0)))
