import math
import shutil

import numpy as np
import pytest
import torch

from conftest import F64, SEED, random_motion
from dataio.kitti import (
    Frame,
    ImageRaster,
    KittiFormatError,
    PointCloud,
    SequenceBundle,
    camera_frame_poses,
    load_sequence,
    read_calib,
    read_image_raster,
    read_point_bin,
    read_poses,
    write_image_raster,
    write_point_bin,
    write_trajectory,
)
from dataio.synth import SceneConfig, ego_poses, generate_sequence, projections, velo_to_cam0
from odometry.geom import RigidMotion, rotation_angle, rotation_distance

IDENTITY_LINE = " ".join(f"{v:.12e}" for v in (1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0))


# === Point Scans ===
def test_point_bin_round_trip(tmp_path):
    points = np.array([[1.5, -2.25, 0.125], [10.0, 0.0, -1.0]])
    write_point_bin(PointCloud(points, intensity=np.array([0.5, 1.0])), tmp_path / "000000.bin")
    cloud = read_point_bin(tmp_path / "000000.bin")
    assert np.array_equal(cloud.points, points)
    assert np.array_equal(cloud.intensity, [0.5, 1.0])
    assert cloud.dropped == 0


def test_point_bin_drops_non_finite_points(tmp_path):
    quads = np.array([[1.0, 2.0, 3.0, 0.1], [np.nan, 0.0, 0.0, 0.2], [4.0, np.inf, 6.0, 0.3]], dtype="<f4")
    (tmp_path / "scan.bin").write_bytes(quads.tobytes())
    cloud = read_point_bin(tmp_path / "scan.bin")
    assert len(cloud) == 1 and cloud.dropped == 2
    assert cloud.points.tolist() == [[1.0, 2.0, 3.0]]


def test_point_bin_rejects_truncated_file(tmp_path):
    (tmp_path / "scan.bin").write_bytes(b"\x00" * 20)
    with pytest.raises(KittiFormatError, match="multiple of 16"):
        read_point_bin(tmp_path / "scan.bin")


# === Rasters ===
def test_raster_round_trip(tmp_path):
    data = np.arange(24, dtype=np.float64).reshape(2, 4, 3) / 255.0
    write_image_raster(ImageRaster(data), tmp_path / "000000.ppm")
    image = read_image_raster(tmp_path / "000000.ppm")
    assert (image.height, image.width, image.channels) == (2, 4, 3)
    assert np.allclose(image.data, data, atol=1e-12)


def test_raster_header_comments_are_skipped(tmp_path):
    (tmp_path / "gray.pgm").write_bytes(b"P5\n# written by hand\n2 1\n255\n" + bytes([0, 255]))
    image = read_image_raster(tmp_path / "gray.pgm")
    assert image.data[..., 0].tolist() == [[0.0, 1.0]]


def test_raster_rejects_compressed_and_wide_formats(tmp_path):
    (tmp_path / "image.png").write_bytes(b"\x89PNG\r\n\x1a\n")
    with pytest.raises(KittiFormatError, match="convert"):
        read_image_raster(tmp_path / "image.png")

    (tmp_path / "deep.pgm").write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(KittiFormatError, match="maxval"):
        read_image_raster(tmp_path / "deep.pgm")


# === Poses & Calibration ===
def test_write_trajectory_format(tmp_path):
    rotation = torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=F64)
    negative_zero = RigidMotion(rotation, torch.tensor([-0.0, 0.0, -0.0], dtype=F64))
    write_trajectory([RigidMotion.identity(), negative_zero], tmp_path / "00.txt")
    assert (tmp_path / "00.txt").read_text().splitlines() == [IDENTITY_LINE, IDENTITY_LINE]


def test_read_poses_round_trip(tmp_path, generator):
    poses = [random_motion(generator, scale=50.0) for _ in range(5)]
    write_trajectory(poses, tmp_path / "poses.txt")
    for read, written in zip(read_poses(tmp_path / "poses.txt"), poses):
        assert rotation_distance(read.rotation, written.rotation) < 1e-10
        assert torch.allclose(read.translation, written.translation, atol=1e-9)


@pytest.mark.parametrize(
    "line, message",
    [
        ("1 0 0 0 0 1 0 0 0 0 1", "expected 12 values"),
        ("1 0 0 0 0 1 0 0 0 0 -1 0", "reflection"),
        ("1 0 0 0 0 1 0 0 0 0 one 0", "line 1"),
    ],
)
def test_read_poses_rejects_malformed_lines(tmp_path, line, message):
    (tmp_path / "poses.txt").write_text(line + "\n")
    with pytest.raises(KittiFormatError, match=message):
        read_poses(tmp_path / "poses.txt")


def test_read_calib_folds_baseline_into_extrinsic(tmp_path):
    identity = "1 0 0 0 0 1 0 0 0 0 1 0"
    (tmp_path / "calib.txt").write_text(f"P2: 100 0 50 50 0 100 20 0 0 0 1 0\nTr: {identity}\n")
    (camera,) = read_calib(tmp_path / "calib.txt", camera_keys=("P2",), image_size=(100, 40))
    assert camera.intrinsics.tolist() == [[100.0, 0.0, 50.0], [0.0, 100.0, 20.0], [0.0, 0.0, 1.0]]
    assert torch.allclose(camera.extrinsic.translation, torch.tensor([0.5, 0.0, 0.0], dtype=torch.float64))
    assert (camera.width, camera.height) == (100, 40)


def test_read_calib_requires_keys(tmp_path):
    (tmp_path / "calib.txt").write_text("P2: 100 0 50 0 0 100 20 0 0 0 1 0\n")
    with pytest.raises(KittiFormatError, match="`Tr`"):
        read_calib(tmp_path / "calib.txt")


# === Sequences ===
def test_bundle_rejects_non_increasing_timestamps():
    frame = Frame(PointCloud(np.ones((1, 3))), ImageRaster(np.zeros((2, 2, 1))), 0.0)
    with pytest.raises(KittiFormatError, match="strictly increasing"):
        SequenceBundle(frames=(frame, frame), cameras=())


def test_load_sequence_round_trip(synth_root, synth_bundle):
    loaded = load_sequence(synth_root, "00")
    assert len(loaded) == len(synth_bundle) == 10
    assert [f.timestamp for f in loaded.frames] == pytest.approx([0.1 * idx for idx in range(10)])
    assert torch.allclose(loaded.cameras[0].intrinsics, synth_bundle.cameras[0].intrinsics)

    for read, written in zip(loaded.gt_poses, synth_bundle.gt_poses):
        assert rotation_distance(read.rotation, written.rotation) < 1e-10
        assert torch.allclose(read.translation, written.translation, atol=1e-9)

    first, original = loaded.frames[0], synth_bundle.frames[0]
    assert np.allclose(first.cloud.points, original.cloud.points, atol=1e-5)
    assert np.abs(first.image.data - original.image.data).max() <= 0.5 / 255.0 + 1e-12


def test_load_sequence_camera_frame_ground_truth(tmp_path, synth_root, synth_bundle):
    root = tmp_path / "kitti"
    shutil.copytree(synth_root, root)
    write_trajectory(camera_frame_poses(synth_bundle.gt_poses, velo_to_cam0()), root / "poses" / "00.txt")

    loaded = load_sequence(root, "00", gt_frame="camera")
    for read, written in zip(loaded.gt_poses, synth_bundle.gt_poses):
        assert rotation_distance(read.rotation, written.rotation) < 1e-9
        assert torch.allclose(read.translation, written.translation, atol=1e-9)


def test_load_sequence_counts_must_match(tmp_path, synth_root):
    root = tmp_path / "kitti"
    shutil.copytree(synth_root, root)
    next((root / "sequences" / "00" / "image_2").glob("*")).unlink()
    with pytest.raises(KittiFormatError, match="10 LiDAR scans but 9"):
        load_sequence(root, "00")


def test_load_sequence_missing_scans(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_sequence(tmp_path, "00")


def test_load_sequence_without_ground_truth(tmp_path, synth_root):
    root = tmp_path / "kitti"
    shutil.copytree(synth_root, root)
    (root / "poses" / "00.txt").unlink()
    assert load_sequence(root, "00").gt_poses is None


# === Synthetic Scenes ===
def test_straight_path_translations():
    poses = ego_poses(SceneConfig(frames=10))
    assert [pose[0, 3] for pose in poses] == [float(idx) for idx in range(10)]
    assert all(np.array_equal(pose[:3, :3], np.eye(3)) for pose in poses)


def test_circle_heading_change_per_frame():
    cfg = SceneConfig(path="circle", frames=5, speed=2.0, radius=20.0, boxes=4)
    bundle = generate_sequence(cfg, SEED)
    for a, b in zip(bundle.gt_poses, bundle.gt_poses[1:]):
        relative = a.inverse().compose(b)
        assert rotation_angle(relative.rotation).item() == pytest.approx(cfg.speed / cfg.radius, abs=1e-12)
        assert torch.linalg.vector_norm(relative.translation).item() == pytest.approx(
            2 * cfg.radius * math.sin(cfg.speed / (2 * cfg.radius)), abs=1e-9
        )


def test_synthetic_sequence_is_seeded(scene):
    a, b = generate_sequence(scene, SEED), generate_sequence(scene, SEED)
    assert np.array_equal(a.frames[3].cloud.points, b.frames[3].cloud.points)
    assert np.array_equal(a.frames[3].image.data, b.frames[3].image.data)
    assert len(a.frames[0].cloud) > 0


def test_synthetic_projections_share_intrinsics(scene):
    proj = projections(scene)
    assert sorted(proj) == ["P0", "P1", "P2", "P3"]
    assert torch.equal(proj["P2"][:, 3], torch.zeros(3, dtype=torch.float64))
