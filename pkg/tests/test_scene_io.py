"""On-disk formats: PLY, labels, poses, intrinsics, depth, frame manifests."""

import numpy as np
import pytest

from sp3d.errors import BadTransform, DimensionMismatch, IoError, MalformedPly
from sp3d.scene_io import (
    UNLABELED,
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    PointCloud,
    load_depth,
    load_intrinsics,
    load_labels,
    load_point_cloud,
    load_pose,
    load_frame_manifest,
    save_depth,
    save_intrinsics,
    save_labels,
    save_point_cloud,
    save_pose,
)


# ---------------------------------------------------------------------------
# PLY


@pytest.mark.parametrize("binary", [True, False])
@pytest.mark.parametrize("with_color", [True, False])
def test_ply_round_trip(tmp_path, binary, with_color):
    rng = np.random.default_rng(0)
    pos = rng.uniform(-5, 5, (40, 3))
    colors = rng.integers(0, 256, (40, 3), dtype=np.uint8) if with_color else None
    path = tmp_path / "cloud.ply"
    save_point_cloud(PointCloud(pos, colors), path, binary=binary)
    back = load_point_cloud(path)
    np.testing.assert_allclose(back.positions, pos.astype(np.float32), rtol=0, atol=0)
    if with_color:
        np.testing.assert_array_equal(back.colors, colors)
    else:
        assert back.colors is None


def test_ply_rejects_missing_magic(tmp_path):
    p = tmp_path / "bad.ply"
    p.write_text("plz\nend_header\n")
    with pytest.raises(MalformedPly):
        load_point_cloud(p)


def test_ply_rejects_big_endian(tmp_path):
    p = tmp_path / "bad.ply"
    p.write_text("ply\nformat binary_big_endian 1.0\nelement vertex 0\n"
                 "property float x\nproperty float y\nproperty float z\nend_header\n")
    with pytest.raises(MalformedPly):
        load_point_cloud(p)


def test_ply_rejects_truncated_binary(tmp_path):
    p = tmp_path / "bad.ply"
    header = ("ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
              "property float x\nproperty float y\nproperty float z\nend_header\n")
    p.write_bytes(header.encode() + b"\x00" * 10)  # needs 24 bytes
    with pytest.raises(MalformedPly):
        load_point_cloud(p)


def test_ply_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_point_cloud(tmp_path / "nope.ply")


def test_point_cloud_validation():
    with pytest.raises(Exception):
        PointCloud(np.zeros((0, 3)))
    with pytest.raises(Exception):
        PointCloud(np.array([[0.0, 0.0, np.nan]]))
    with pytest.raises(DimensionMismatch):
        PointCloud(np.zeros((3, 3)), colors=np.zeros((2, 3), dtype=np.uint8))


# ---------------------------------------------------------------------------
# labels


def test_labels_round_trip(tmp_path):
    labels = np.array([0, 5, UNLABELED, 123456], dtype=np.uint32)
    path = tmp_path / "labels.bin"
    save_labels(labels, path)
    np.testing.assert_array_equal(load_labels(path), labels)


def test_labels_bad_magic(tmp_path):
    p = tmp_path / "labels.bin"
    p.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(IoError):
        load_labels(p)


def test_labels_truncated(tmp_path):
    labels = np.arange(10, dtype=np.uint32)
    path = tmp_path / "labels.bin"
    save_labels(labels, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(IoError):
        load_labels(path)


# ---------------------------------------------------------------------------
# pose / intrinsics / depth


def test_pose_round_trip_exact(tmp_path):
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    m = np.eye(4)
    m[:3, :3] = q
    m[:3, 3] = [0.1, -2.5, 3.75]
    pose = CameraPose(m)
    path = tmp_path / "0.pose.txt"
    save_pose(pose, path)
    np.testing.assert_array_equal(load_pose(path).world_to_camera, m)


def test_pose_rejects_non_rigid():
    bad = np.eye(4)
    bad[0, 0] = 2.0
    with pytest.raises(BadTransform):
        CameraPose(bad)
    refl = np.eye(4)
    refl[0, 0] = -1.0
    with pytest.raises(BadTransform):
        CameraPose(refl)
    last_row = np.eye(4)
    last_row[3, 0] = 0.5
    with pytest.raises(BadTransform):
        CameraPose(last_row)


def test_camera_to_world_inverts_pose():
    rng = np.random.default_rng(11)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    m = np.eye(4)
    m[:3, :3] = q
    m[:3, 3] = [1.0, 2.0, 3.0]
    pose = CameraPose(m)
    np.testing.assert_allclose(pose.camera_to_world() @ m, np.eye(4), atol=1e-12)


def test_intrinsics_round_trip(tmp_path):
    intr = CameraIntrinsics(199.123456789, 200.5, 160.25, 120.0, 320, 240)
    path = tmp_path / "intrinsics.txt"
    save_intrinsics(intr, path)
    assert load_intrinsics(path) == intr


def test_intrinsics_validation():
    with pytest.raises(DimensionMismatch):
        CameraIntrinsics(-1.0, 1.0, 0.0, 0.0, 10, 10)
    with pytest.raises(DimensionMismatch):
        CameraIntrinsics(1.0, 1.0, 20.0, 0.0, 10, 10)


def test_intrinsics_rescale():
    intr = CameraIntrinsics(100.0, 200.0, 50.0, 60.0, 100, 120)
    half = intr.rescaled(50, 60)
    assert half == CameraIntrinsics(50.0, 100.0, 25.0, 30.0, 50, 60)


@pytest.mark.parametrize("suffix", [".png", ".pgm"])
def test_depth_round_trip_millimeter_quantized(tmp_path, suffix):
    rng = np.random.default_rng(5)
    depth = rng.uniform(0, 10, (6, 8))
    depth[0, 0] = 0.0
    path = tmp_path / f"0.depth{suffix}"
    save_depth(DepthMap(8, 6, depth), path)
    back = load_depth(path)
    np.testing.assert_allclose(back.depth, np.round(depth * 1000) / 1000, atol=1e-9)


def test_depth_custom_scale(tmp_path):
    depth = np.full((2, 2), 1.234)
    path = tmp_path / "d.png"
    save_depth(DepthMap(2, 2, depth), path, depth_scale=100.0)
    back = load_depth(path, depth_scale=100.0)
    np.testing.assert_allclose(back.depth, 1.23, atol=1e-9)


def test_depth_validation():
    with pytest.raises(Exception):
        DepthMap(2, 2, np.full((2, 2), -1.0))
    with pytest.raises(DimensionMismatch):
        DepthMap(3, 2, np.zeros((2, 2)))


# ---------------------------------------------------------------------------
# frame manifest


def _write_frame_files(scene_dir, n_frames):
    save_intrinsics(CameraIntrinsics(10.0, 10.0, 4.0, 3.0, 8, 6), scene_dir / "intrinsics.txt")
    for fid in range(n_frames):
        save_pose(CameraPose(np.eye(4)), scene_dir / f"{fid}.pose.txt")
        save_depth(DepthMap(8, 6, np.ones((6, 8))), scene_dir / f"{fid}.depth.png")


def test_manifest_stride_keeps_multiples(tmp_path):
    _write_frame_files(tmp_path, 100)
    frames = load_frame_manifest(tmp_path, frame_stride=20)
    assert [f.id for f in frames] == [0, 20, 40, 60, 80]
    assert len(load_frame_manifest(tmp_path, frame_stride=1)) == 100


def test_manifest_rescales_intrinsics_to_depth(tmp_path):
    save_intrinsics(CameraIntrinsics(20.0, 20.0, 8.0, 6.0, 16, 12), tmp_path / "intrinsics.txt")
    save_pose(CameraPose(np.eye(4)), tmp_path / "0.pose.txt")
    save_depth(DepthMap(8, 6, np.ones((6, 8))), tmp_path / "0.depth.png")
    frames = load_frame_manifest(tmp_path)
    assert frames[0].intrinsics == CameraIntrinsics(10.0, 10.0, 4.0, 3.0, 8, 6)


def test_manifest_missing_depth(tmp_path):
    save_intrinsics(CameraIntrinsics(10.0, 10.0, 4.0, 3.0, 8, 6), tmp_path / "intrinsics.txt")
    save_pose(CameraPose(np.eye(4)), tmp_path / "0.pose.txt")
    from sp3d.errors import MissingDepth

    with pytest.raises(MissingDepth):
        load_frame_manifest(tmp_path)
