"""
kitti.py

Bit-exact readers and writers for KITTI-odometry-format sequences:

    <root>/sequences/<seq>/velodyne/000000.bin      little-endian f32 (x, y, z, reflectance) quadruples
    <root>/sequences/<seq>/image_2/000000.ppm       binary PGM (P5) / PPM (P6), maxval 255
    <root>/sequences/<seq>/calib.txt                "KEY: v1 v2 ..." lines (P0..P3, Tr)
    <root>/sequences/<seq>/times.txt                [Optional] one timestamp per line (10 Hz synthesized otherwise)
    <root>/poses/<seq>.txt                          [Optional] 12 floats per line, row-major top 3x4 (world <- frame)

Compressed images are out of scope: convert PNG rasters offline (e.g. `convert 000000.png 000000.ppm`).
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from odometry.geom import CameraModel, GeometryError, RigidMotion
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

FRAME_PERIOD = 0.1
IMAGE_DIRS = {"P0": "image_0", "P1": "image_1", "P2": "image_2", "P3": "image_3"}
RASTER_SUFFIXES = (".ppm", ".pgm")


class KittiFormatError(ValueError):
    pass


# === Domain Types ===
@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray                                      # (N, 3) float64 meters; x forward, y left, z up
    intensity: Optional[np.ndarray] = None                  # (N,) reflectance, preserved but unused by the encoders
    dropped: int = 0                                        # Non-finite points removed on load

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ImageRaster:
    data: np.ndarray                                        # (H, W, C) float64 in [0, 1]

    def __post_init__(self) -> None:
        assert self.data.ndim == 3 and self.data.shape[2] in {1, 3}, f"Bad raster shape {self.data.shape}"

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Frame:
    cloud: PointCloud
    image: ImageRaster
    timestamp: float


@dataclass(frozen=True)
class SequenceBundle:
    frames: Tuple[Frame, ...]
    cameras: Tuple[CameraModel, ...]
    gt_poses: Optional[Tuple[RigidMotion, ...]] = None      # world <- frame, LiDAR frame
    sequence_id: str = ""

    def __post_init__(self) -> None:
        stamps = [frame.timestamp for frame in self.frames]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise KittiFormatError(f"Sequence `{self.sequence_id}` timestamps are not strictly increasing")
        if self.gt_poses is not None and len(self.gt_poses) != len(self.frames):
            raise KittiFormatError(
                f"Sequence `{self.sequence_id}` has {len(self.frames)} frames but {len(self.gt_poses)} poses"
            )

    def __len__(self) -> int:
        return len(self.frames)


# === Readers ===
def read_point_bin(path: Union[str, Path]) -> PointCloud:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % 16 != 0:
        raise KittiFormatError(f"`{path}` has {len(raw)} bytes, not a multiple of 16 (x, y, z, reflectance f32)")

    quads = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    finite = np.isfinite(quads[:, :3]).all(axis=1)
    if (dropped := int((~finite).sum())) > 0:
        overwatch.warning(f"Dropped {dropped} non-finite points from `{path}`")

    return PointCloud(points=quads[finite, :3], intensity=quads[finite, 3], dropped=dropped)


def _parse_floats(tokens: Sequence[str], path: Path, lineno: int) -> List[float]:
    try:
        return [float(tok) for tok in tokens]
    except ValueError as err:
        raise KittiFormatError(f"`{path}` line {lineno}: {err}") from err


def _rows_to_matrix(values: Sequence[float]) -> torch.Tensor:
    matrix = torch.eye(4, dtype=torch.float64)
    matrix[:3, :] = torch.tensor(values, dtype=torch.float64).reshape(3, 4)
    return matrix


def read_poses(path: Union[str, Path]) -> List[RigidMotion]:
    path, poses = Path(path), []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not (tokens := line.split()):
            continue
        if len(tokens) != 12:
            raise KittiFormatError(f"`{path}` line {lineno}: expected 12 values, found {len(tokens)}")
        try:
            poses.append(RigidMotion.from_matrix(_rows_to_matrix(_parse_floats(tokens, path, lineno))))
        except GeometryError as err:
            raise KittiFormatError(f"`{path}` line {lineno}: {err}") from err

    return poses


def read_calib_entries(path: Union[str, Path]) -> Dict[str, List[float]]:
    path, entries = Path(path), {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, values = line.partition(":")
        if not sep:
            raise KittiFormatError(f"`{path}` line {lineno}: expected `KEY: values`")
        entries[key.strip()] = _parse_floats(values.split(), path, lineno)

    return entries


def read_calib(
    path: Union[str, Path], camera_keys: Sequence[str] = ("P2",), image_size: Tuple[int, int] = (1241, 376)
) -> List[CameraModel]:
    """Decompose each projection P = K [I | b] and fold the baseline offset b into the LiDAR -> camera chain with Tr."""
    entries = read_calib_entries(path)
    for key in (*camera_keys, "Tr"):
        if key not in entries:
            raise KittiFormatError(f"`{path}` is missing required key `{key}`")
        if len(entries[key]) != 12:
            raise KittiFormatError(f"`{path}` key `{key}` holds {len(entries[key])} values, expected 12")

    try:
        velo_to_cam0 = RigidMotion.from_matrix(_rows_to_matrix(entries["Tr"]))
    except GeometryError as err:
        raise KittiFormatError(f"`{path}` key `Tr`: {err}") from err

    cameras = []
    for key in camera_keys:
        projection = torch.tensor(entries[key], dtype=torch.float64).reshape(3, 4)
        projection = projection / projection[2, 2]
        intrinsics = projection[:, :3].clone()
        baseline = torch.linalg.solve(intrinsics, projection[:, 3])
        cam0_to_cam = RigidMotion(torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=torch.float64), baseline)
        try:
            cameras.append(CameraModel(intrinsics, cam0_to_cam.compose(velo_to_cam0), *image_size))
        except GeometryError as err:
            raise KittiFormatError(f"`{path}` key `{key}`: {err}") from err

    return cameras


def _read_token(raw: bytes, pos: int) -> Tuple[bytes, int]:
    """Next whitespace-delimited header token of a netpbm file, skipping `#` comments."""
    while pos < len(raw):
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in {b"\n", b"\r"}:
                pos += 1
        elif raw[pos : pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(raw) and not raw[pos : pos + 1].isspace():
        pos += 1
    return raw[start:pos], pos


def read_image_raster(path: Union[str, Path]) -> ImageRaster:
    path = Path(path)
    raw = path.read_bytes()
    magic = raw[:2]
    if magic not in {b"P5", b"P6"}:
        raise KittiFormatError(
            f"`{path}` is not a binary PGM/PPM (magic {magic!r}); convert it offline, e.g. `convert in.png out.ppm`"
        )

    pos, header = 2, []
    for _ in range(3):
        token, pos = _read_token(raw, pos)
        header.append(token)
    try:
        width, height, maxval = (int(tok) for tok in header)
    except ValueError as err:
        raise KittiFormatError(f"`{path}` has a malformed netpbm header {header}") from err
    if maxval != 255:
        raise KittiFormatError(f"`{path}` has maxval {maxval}; only 8-bit rasters (255) are supported")

    channels = 1 if magic == b"P5" else 3
    pixels = raw[pos + 1 :]
    if len(pixels) < width * height * channels:
        raise KittiFormatError(f"`{path}` is truncated: {len(pixels)} < {width * height * channels} pixel bytes")

    data = np.frombuffer(pixels[: width * height * channels], dtype=np.uint8).reshape(height, width, channels)
    return ImageRaster(data.astype(np.float64) / 255.0)


def read_times(path: Union[str, Path]) -> List[float]:
    path = Path(path)
    return [
        _parse_floats([line.strip()], path, lineno)[0]
        for lineno, line in enumerate(path.read_text().splitlines(), start=1)
        if line.strip()
    ]


# === Writers ===
def _format_pose(pose: RigidMotion) -> str:
    # `+ 0.0` folds negative zeros so equal trajectories serialize to equal bytes
    rows = pose.to_matrix()[:3, :].reshape(-1).tolist()
    return " ".join(f"{value + 0.0:.12e}" for value in rows)


def write_trajectory(poses: Sequence[RigidMotion], path: Union[str, Path]) -> None:
    path = Path(path)
    path.write_text("".join(f"{_format_pose(pose)}\n" for pose in poses))


def write_xyz(poses: Sequence[RigidMotion], path: Union[str, Path]) -> None:
    """One `x y z` line per pose, for external plotters."""
    Path(path).write_text(
        "".join(" ".join(f"{v + 0.0:.9f}" for v in pose.translation.tolist()) + "\n" for pose in poses)
    )


def write_point_bin(cloud: PointCloud, path: Union[str, Path]) -> None:
    intensity = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    quads = np.concatenate([cloud.points, intensity[:, None]], axis=1).astype("<f4")
    Path(path).write_bytes(quads.tobytes())


def write_image_raster(image: ImageRaster, path: Union[str, Path]) -> None:
    magic = b"P5" if image.channels == 1 else b"P6"
    pixels = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    Path(path).write_bytes(magic + f"\n{image.width} {image.height}\n255\n".encode() + pixels.tobytes())


def write_calib(cameras: Dict[str, torch.Tensor], velo_to_cam0: RigidMotion, path: Union[str, Path]) -> None:
    """Write `KEY: ...` lines from 3x4 projection matrices plus the LiDAR -> cam0 transform as `Tr`."""
    lines = [
        f"{key}: " + " ".join(f"{v + 0.0:.12e}" for v in proj.reshape(-1).tolist()) for key, proj in cameras.items()
    ]
    lines.append(f"Tr: {_format_pose(velo_to_cam0)}")
    Path(path).write_text("\n".join(lines) + "\n")


# === Sequences ===
def _lidar_frame_poses(poses: Sequence[RigidMotion], velo_to_cam0: RigidMotion) -> List[RigidMotion]:
    """Camera-frame ground truth (KITTI) -> LiDAR frame: Tr⁻¹ · T · Tr."""
    cam0_to_velo = velo_to_cam0.inverse()
    return [cam0_to_velo.compose(pose).compose(velo_to_cam0) for pose in poses]


def camera_frame_poses(poses: Sequence[RigidMotion], velo_to_cam0: RigidMotion) -> List[RigidMotion]:
    """LiDAR-frame trajectory -> KITTI camera frame: Tr · T · Tr⁻¹."""
    cam0_to_velo = velo_to_cam0.inverse()
    return [velo_to_cam0.compose(pose).compose(cam0_to_velo) for pose in poses]


def read_velo_to_cam0(path: Union[str, Path]) -> RigidMotion:
    entries = read_calib_entries(path)
    if "Tr" not in entries:
        raise KittiFormatError(f"`{path}` is missing required key `Tr`")
    return RigidMotion.from_matrix(_rows_to_matrix(entries["Tr"]))


def sequence_dir(root: Union[str, Path], seq: str) -> Path:
    return Path(root) / "sequences" / seq


def load_sequence(
    root: Union[str, Path], seq: str, camera: str = "P2", gt_frame: str = "lidar"
) -> SequenceBundle:
    """Load a full sequence; ground truth (if present) is returned in the LiDAR frame."""
    seq_dir = sequence_dir(root, seq)
    if camera not in IMAGE_DIRS:
        raise KittiFormatError(f"Camera key `{camera}` is not supported; choose one of {sorted(IMAGE_DIRS)}")

    scans = sorted((seq_dir / "velodyne").glob("*.bin"))
    rasters = sorted(p for p in (seq_dir / IMAGE_DIRS[camera]).glob("*") if p.suffix in RASTER_SUFFIXES)
    if not scans:
        raise FileNotFoundError(f"No velodyne scans found under `{seq_dir / 'velodyne'}`")
    if len(scans) != len(rasters):
        raise KittiFormatError(
            f"Sequence `{seq}` has {len(scans)} LiDAR scans but {len(rasters)} `{IMAGE_DIRS[camera]}` rasters"
        )

    overwatch.info(f"Loading sequence `{seq}` from `{seq_dir}` ({len(scans)} frames)")
    images = [read_image_raster(p) for p in rasters]
    cameras = read_calib(seq_dir / "calib.txt", camera_keys=(camera,), image_size=(images[0].width, images[0].height))

    times_path = seq_dir / "times.txt"
    stamps = read_times(times_path) if times_path.exists() else [idx * FRAME_PERIOD for idx in range(len(scans))]
    if len(stamps) != len(scans):
        raise KittiFormatError(f"`{times_path}` has {len(stamps)} stamps for {len(scans)} frames")

    frames = tuple(Frame(read_point_bin(s), img, t) for s, img, t in zip(scans, images, stamps))
    if (dropped := sum(frame.cloud.dropped for frame in frames)) > 0:
        overwatch.info(f"Sequence `{seq}` dropped {dropped} non-finite points in total", ctx_level=1)

    gt_poses, poses_path = None, Path(root) / "poses" / f"{seq}.txt"
    if poses_path.exists():
        gt_poses = read_poses(poses_path)
        if gt_frame == "camera":
            gt_poses = _lidar_frame_poses(gt_poses, read_velo_to_cam0(seq_dir / "calib.txt"))
        gt_poses = tuple(gt_poses)

    return SequenceBundle(frames=frames, cameras=tuple(cameras), gt_poses=gt_poses, sequence_id=seq)


def write_sequence(
    bundle: SequenceBundle,
    root: Union[str, Path],
    projections: Dict[str, torch.Tensor],
    velo_to_cam0: RigidMotion,
    camera: str = "P2",
) -> Path:
    """Write a bundle in the KITTI layout (poses in the LiDAR frame); returns the sequence directory."""
    seq_dir = sequence_dir(root, bundle.sequence_id)
    (seq_dir / "velodyne").mkdir(parents=True, exist_ok=True)
    (seq_dir / IMAGE_DIRS[camera]).mkdir(parents=True, exist_ok=True)

    for idx, frame in enumerate(bundle.frames):
        write_point_bin(frame.cloud, seq_dir / "velodyne" / f"{idx:06d}.bin")
        suffix = ".pgm" if frame.image.channels == 1 else ".ppm"
        write_image_raster(frame.image, seq_dir / IMAGE_DIRS[camera] / f"{idx:06d}{suffix}")

    write_calib(projections, velo_to_cam0, seq_dir / "calib.txt")
    (seq_dir / "times.txt").write_text("".join(f"{frame.timestamp:.6e}\n" for frame in bundle.frames))
    if bundle.gt_poses is not None:
        (Path(root) / "poses").mkdir(parents=True, exist_ok=True)
        write_trajectory(bundle.gt_poses, Path(root) / "poses" / f"{bundle.sequence_id}.txt")

    return seq_dir


def replace_frames(
    bundle: SequenceBundle, frames: Sequence[Frame], gt_poses: Optional[Sequence[RigidMotion]]
) -> SequenceBundle:
    return dataclasses.replace(bundle, frames=tuple(frames), gt_poses=None if gt_poses is None else tuple(gt_poses))
