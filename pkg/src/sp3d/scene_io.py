"""Scene data loading and writing: point clouds, camera frames, depth maps, labels."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BadTransform,
    DimensionMismatch,
    EmptyCloud,
    IoError,
    MalformedPly,
    MissingDepth,
    MissingPose,
    NonFiniteCoordinate,
)

UNLABELED = 0xFFFFFFFF
LABEL_MAGIC = b"SP3D"
LABEL_VERSION = 1
DEFAULT_DEPTH_SCALE = 1000.0
RIGIDITY_TOL = 1e-4


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray  # (N, 3) float64, meters, world frame
    colors: np.ndarray | None = None  # (N, 3) uint8 or None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise EmptyCloud(f"need an (N,3) array with N >= 1, got shape {pos.shape}")
        if not np.isfinite(pos).all():
            raise NonFiniteCoordinate("point cloud contains non-finite coordinates")
        object.__setattr__(self, "positions", pos)
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.uint8)
            if col.shape != pos.shape:
                raise DimensionMismatch("colors must match positions in length")
            object.__setattr__(self, "colors", col)

    def __len__(self):
        return self.positions.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DimensionMismatch("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DimensionMismatch("principal point outside image")

    def rescaled(self, width: int, height: int) -> "CameraIntrinsics":
        """Linearly rescale to a new image resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)


@dataclass(frozen=True)
class CameraPose:
    world_to_camera: np.ndarray  # (4, 4) rigid transform

    def __post_init__(self):
        m = np.asarray(self.world_to_camera, dtype=np.float64)
        if m.shape != (4, 4):
            raise BadTransform(f"expected a 4x4 matrix, got {m.shape}")
        r = m[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=RIGIDITY_TOL):
            raise BadTransform("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise BadTransform("rotation has negative determinant (reflection)")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=RIGIDITY_TOL):
            raise BadTransform("last row must be (0,0,0,1)")
        object.__setattr__(self, "world_to_camera", m)

    def camera_to_world(self) -> np.ndarray:
        m = self.world_to_camera
        inv = np.eye(4)
        inv[:3, :3] = m[:3, :3].T
        inv[:3, 3] = -m[:3, :3].T @ m[:3, 3]
        return inv


@dataclass(frozen=True)
class DepthMap:
    width: int
    height: int
    depth: np.ndarray  # (height, width) float64 meters, 0 = invalid

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.shape != (self.height, self.width):
            raise DimensionMismatch(f"depth shape {d.shape} != ({self.height},{self.width})")
        if not np.isfinite(d).all() or (d < 0).any():
            raise NonFiniteCoordinate("depth values must be finite and >= 0")
        object.__setattr__(self, "depth", d)


@dataclass(frozen=True)
class Frame:
    id: int
    intrinsics: CameraIntrinsics
    pose: CameraPose
    depth: DepthMap

    def __post_init__(self):
        if self.id < 0:
            raise DimensionMismatch("frame id must be non-negative")
        if (self.depth.width, self.depth.height) != (self.intrinsics.width, self.intrinsics.height):
            raise DimensionMismatch("depth dimensions must equal intrinsics dimensions")


# ---------------------------------------------------------------------------
# PLY


def load_point_cloud(path) -> PointCloud:
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    with open(path, "rb") as f:
        header_lines = []
        while True:
            line = f.readline()
            if not line:
                raise MalformedPly("EOF before end_header")
            header_lines.append(line.decode("ascii", "replace").strip())
            if header_lines[-1] == "end_header":
                break
        if not header_lines or header_lines[0] != "ply":
            raise MalformedPly("missing 'ply' magic")
        fmt = None
        n = None
        props = []
        in_vertex = False
        for ln in header_lines[1:]:
            parts = ln.split()
            if not parts:
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                in_vertex = parts[1] == "vertex"
                if in_vertex:
                    n = int(parts[2])
            elif parts[0] == "property" and in_vertex:
                props.append((parts[1], parts[2]))
        if fmt not in ("ascii", "binary_little_endian"):
            raise MalformedPly(f"unsupported format {fmt!r}")
        if n is None:
            raise MalformedPly("no vertex element")
        names = [p[1] for p in props]
        for axis in ("x", "y", "z"):
            if axis not in names:
                raise MalformedPly(f"missing vertex property {axis!r}")
        type_map = {
            "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
            "uchar": "u1", "uint8": "u1", "char": "i1", "int8": "i1",
            "short": "<i2", "ushort": "<u2", "int": "<i4", "uint": "<u4",
            "int32": "<i4", "uint32": "<u4",
        }
        try:
            dtype = np.dtype([(nm, type_map[t]) for t, nm in props])
        except KeyError as e:
            raise MalformedPly(f"unsupported property type {e}")
        if fmt == "ascii":
            rows = []
            for _ in range(n):
                line = f.readline()
                if not line:
                    raise MalformedPly("truncated vertex data")
                vals = line.split()
                if len(vals) != len(props):
                    raise MalformedPly("vertex line field count mismatch")
                rows.append(tuple(vals))
            data = np.array(rows, dtype=dtype)
        else:
            raw = f.read(dtype.itemsize * n)
            if len(raw) != dtype.itemsize * n:
                raise MalformedPly("truncated vertex data")
            data = np.frombuffer(raw, dtype=dtype)
    pos = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        colors = np.stack([data["red"], data["green"], data["blue"]], axis=1).astype(np.uint8)
    return PointCloud(pos, colors)


def save_point_cloud(cloud: PointCloud, path, binary: bool = True) -> None:
    path = Path(path)
    n = len(cloud)
    has_color = cloud.colors is not None
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += ["property float x", "property float y", "property float z"]
    if has_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if has_color:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    data = np.empty(n, dtype=np.dtype(fields))
    pos32 = cloud.positions.astype(np.float32)
    data["x"], data["y"], data["z"] = pos32[:, 0], pos32[:, 1], pos32[:, 2]
    if has_color:
        data["red"], data["green"], data["blue"] = (cloud.colors[:, i] for i in range(3))
    try:
        with open(path, "wb") as f:
            f.write(("\n".join(header) + "\n").encode("ascii"))
            if binary:
                f.write(data.tobytes())
            else:
                for row in data:
                    vals = [repr(float(row[k])) for k in ("x", "y", "z")]
                    if has_color:
                        vals += [str(int(row[k])) for k in ("red", "green", "blue")]
                    f.write((" ".join(vals) + "\n").encode("ascii"))
    except OSError as e:
        raise IoError(str(e))


# ---------------------------------------------------------------------------
# intrinsics / pose / depth files


def load_intrinsics(path) -> CameraIntrinsics:
    try:
        vals = [float(v) for v in Path(path).read_text().split()]
    except (OSError, ValueError) as e:
        raise IoError(f"bad intrinsics file {path}: {e}")
    if len(vals) != 6:
        raise IoError(f"intrinsics file {path} must hold 6 numbers")
    fx, fy, cx, cy, w, h = vals
    return CameraIntrinsics(fx, fy, cx, cy, int(w), int(h))


def save_intrinsics(intr: CameraIntrinsics, path) -> None:
    Path(path).write_text(
        f"{float(intr.fx)!r} {float(intr.fy)!r} {float(intr.cx)!r} {float(intr.cy)!r} "
        f"{intr.width} {intr.height}\n"
    )


def load_pose(path) -> CameraPose:
    try:
        vals = [float(v) for v in Path(path).read_text().split()]
    except (OSError, ValueError) as e:
        raise IoError(f"bad pose file {path}: {e}")
    if len(vals) != 16:
        raise IoError(f"pose file {path} must hold 16 numbers")
    return CameraPose(np.array(vals, dtype=np.float64).reshape(4, 4))


def save_pose(pose: CameraPose, path) -> None:
    rows = [" ".join(repr(float(v)) for v in row) for row in pose.world_to_camera]
    Path(path).write_text("\n".join(rows) + "\n")


def load_depth(path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> DepthMap:
    path = Path(path)
    if path.suffix == ".pgm":
        raw = _read_pgm16(path)
    else:
        img = Image.open(path)
        raw = np.array(img)
        if raw.dtype not in (np.uint16, np.int32, np.uint8):
            raise IoError(f"unexpected depth dtype {raw.dtype} in {path}")
        raw = raw.astype(np.uint32)
    h, w = raw.shape
    return DepthMap(w, h, raw.astype(np.float64) / depth_scale)


def save_depth(depth: DepthMap, path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> None:
    quant = np.clip(np.round(depth.depth * depth_scale), 0, 65535).astype(np.uint16)
    path = Path(path)
    if path.suffix == ".pgm":
        with open(path, "wb") as f:
            f.write(f"P5\n{depth.width} {depth.height}\n65535\n".encode("ascii"))
            f.write(quant.astype(">u2").tobytes())
    else:
        Image.fromarray(quant).save(path)


def _read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    # header: magic, width, height, maxval, separated by whitespace (no comments)
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise IoError(f"bad PGM header in {path}")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 65535:
        raise IoError(f"expected 16-bit PGM in {path}")
    pix = np.frombuffer(parts[4][: w * h * 2], dtype=">u2")
    if pix.size != w * h:
        raise IoError(f"truncated PGM {path}")
    return pix.reshape(h, w).astype(np.uint32)


# ---------------------------------------------------------------------------
# frame manifest


def load_frame_manifest(scene_dir, frame_stride: int = 1,
                        depth_scale: float = DEFAULT_DEPTH_SCALE) -> list[Frame]:
    """Load frames with ids {0, stride, 2*stride, ...} present in the directory."""
    scene_dir = Path(scene_dir)
    if frame_stride < 1:
        raise IoError("frame_stride must be a positive integer")
    intr = load_intrinsics(scene_dir / "intrinsics.txt")
    ids = sorted(
        int(p.name.split(".")[0]) for p in scene_dir.glob("*.pose.txt")
    )
    frames = []
    for fid in ids:
        if fid % frame_stride != 0:
            continue
        pose_path = scene_dir / f"{fid}.pose.txt"
        if not pose_path.exists():
            raise MissingPose(str(pose_path))
        try:
            pose = load_pose(pose_path)
        except BadTransform:
            raise
        except IoError:
            raise
        depth_path = scene_dir / f"{fid}.depth.png"
        if not depth_path.exists():
            depth_path = scene_dir / f"{fid}.depth.pgm"
        if not depth_path.exists():
            raise MissingDepth(f"no depth file for frame {fid} in {scene_dir}")
        depth = load_depth(depth_path, depth_scale)
        frame_intr = intr
        if (depth.width, depth.height) != (intr.width, intr.height):
            frame_intr = intr.rescaled(depth.width, depth.height)
        frames.append(Frame(fid, frame_intr, pose, depth))
    return frames


# ---------------------------------------------------------------------------
# segmentation labels


def save_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.uint32)
    try:
        with open(path, "wb") as f:
            f.write(LABEL_MAGIC)
            f.write(struct.pack("<II", LABEL_VERSION, labels.size))
            f.write(labels.astype("<u4").tobytes())
    except OSError as e:
        raise IoError(str(e))


def load_labels(path) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != LABEL_MAGIC:
                raise IoError(f"bad label magic in {path}")
            version, n = struct.unpack("<II", f.read(8))
            if version != LABEL_VERSION:
                raise IoError(f"unsupported label version {version}")
            data = np.frombuffer(f.read(4 * n), dtype="<u4")
            if data.size != n:
                raise IoError(f"truncated label file {path}")
            return data.astype(np.uint32)
    except OSError as e:
        raise IoError(str(e))


def instance_color(instance_id: int) -> tuple[int, int, int]:
    """Deterministic pseudo-random color for an instance id."""
    h = (instance_id * 2654435761) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0x5BD1E995) & 0xFFFFFFFF
    return (32 + (h & 0xFF) * 7 // 8, 32 + ((h >> 8) & 0xFF) * 7 // 8, 32 + ((h >> 16) & 0xFF) * 7 // 8)


def save_segmentation(labels: np.ndarray, cloud: PointCloud, path,
                      ply_path=None) -> None:
    """Write the binary label file and, optionally, a per-instance colored PLY."""
    labels = np.asarray(labels, dtype=np.uint32)
    if labels.size != len(cloud):
        raise DimensionMismatch("label count must equal point count")
    save_labels(labels, path)
    if ply_path is not None:
        colors = np.zeros((len(cloud), 3), dtype=np.uint8)
        for iid in np.unique(labels):
            colors[labels == iid] = (64, 64, 64) if iid == UNLABELED else instance_color(int(iid))
        save_point_cloud(PointCloud(cloud.positions, colors), ply_path)
