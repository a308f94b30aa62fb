"""
synth.py

Synthetic KITTI-format fixtures: an ego path (straight line or circle) through a seeded plane-and-box scene, a
ray-cast spinning LiDAR, and a grayscale camera raster shaded by depth. Ground truth is exact by construction and is
expressed in the LiDAR frame (world <- frame).
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import torch

from dataio.kitti import FRAME_PERIOD, Frame, ImageRaster, PointCloud, SequenceBundle
from odometry.geom import CameraModel, RigidMotion, matrix_to_quat
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

# LiDAR (x fwd, y left, z up) -> camera (x right, y down, z fwd)
LIDAR_TO_CAMERA_ROTATION = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
LIDAR_TO_CAMERA_TRANSLATION = np.array([0.0, -0.08, -0.27])
SKY_INTENSITY = 0.9


@dataclass
class SceneConfig:
    # fmt: off
    path: str = "straight"                                  # Ego path: "straight" | "circle"
    frames: int = 10                                        # Number of frames to generate
    speed: float = 1.0                                      # Meters travelled per frame
    radius: float = 20.0                                    # Circle radius (meters), `path == "circle"` only
    boxes: int = 24                                         # Axis-aligned boxes scattered along the path
    beams: int = 16                                         # LiDAR beams (rows)
    azimuth_samples: int = 360                              # LiDAR columns per sweep
    fov_up: float = 2.0                                     # Upper beam elevation (degrees)
    fov_down: float = -15.0                                 # Lower beam elevation (degrees)
    max_range: float = 60.0                                 # LiDAR max range (meters)
    sensor_height: float = 1.73                             # LiDAR height above ground (meters)
    image_height: int = 64                                  # Camera raster height (pixels)
    image_width: int = 128                                  # Camera raster width (pixels)
    focal: float = 64.0                                     # Focal length (pixels)
    # fmt: on

    def __post_init__(self) -> None:
        assert self.path in {"straight", "circle"}, f"Synthetic path `{self.path}` is not supported!"
        assert self.frames >= 1, "Need at least one frame!"
        assert self.radius > 0, "Circle radius must be positive!"


def ego_poses(cfg: SceneConfig) -> List[np.ndarray]:
    """World <- LiDAR 4x4 poses; the circle turns left with heading change speed / radius per frame."""
    poses = []
    for idx in range(cfg.frames):
        pose = np.eye(4)
        if cfg.path == "straight":
            pose[0, 3] = idx * cfg.speed
        else:
            heading = idx * cfg.speed / cfg.radius
            c, s = math.cos(heading), math.sin(heading)
            pose[:2, :2] = [[c, -s], [s, c]]
            pose[:3, 3] = [cfg.radius * s, cfg.radius * (1.0 - c), 0.0]
        poses.append(pose)
    return poses


def _scatter_boxes(cfg: SceneConfig, poses: List[np.ndarray], rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    anchors = rng.integers(0, len(poses), size=cfg.boxes)
    side = rng.choice([-1.0, 1.0], size=cfg.boxes)
    lateral = side * rng.uniform(4.0, 12.0, size=cfg.boxes)
    ahead = rng.uniform(-5.0, 25.0, size=cfg.boxes)
    sizes = rng.uniform(1.0, 4.0, size=(cfg.boxes, 2))
    heights = rng.uniform(1.0, 5.0, size=cfg.boxes)
    albedo = rng.uniform(0.2, 1.0, size=cfg.boxes)

    centers = np.stack(
        [poses[a][:3, :3] @ np.array([f, l, 0.0]) + poses[a][:3, 3] for a, f, l in zip(anchors, ahead, lateral)]
    )
    ground = -cfg.sensor_height
    lo = np.stack([centers[:, 0] - sizes[:, 0] / 2, centers[:, 1] - sizes[:, 1] / 2, np.full(cfg.boxes, ground)], 1)
    hi = np.stack([centers[:, 0] + sizes[:, 0] / 2, centers[:, 1] + sizes[:, 1] / 2, ground + heights], 1)
    return lo, hi, albedo


def _cast(
    origin: np.ndarray, dirs: np.ndarray, boxes: Tuple[np.ndarray, ...], cfg: SceneConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest hit distance and surface albedo per world-frame ray (inf / sky where nothing is hit)."""
    lo, hi, albedo = boxes
    dist = np.full(dirs.shape[0], np.inf)
    shade = np.full(dirs.shape[0], SKY_INTENSITY)

    # Ground plane with a 2 m checkerboard texture
    down = dirs[:, 2] < 0
    s_ground = np.where(down, (-cfg.sensor_height - origin[2]) / np.where(down, dirs[:, 2], -1.0), np.inf)
    hit = origin[None, :2] + np.where(down, s_ground, 0.0)[:, None] * dirs[:, :2]
    checker = (np.floor(hit[:, 0] / 2.0) + np.floor(hit[:, 1] / 2.0)) % 2
    dist = np.where(down, s_ground, dist)
    shade = np.where(down, 0.3 + 0.2 * checker, shade)

    # Axis-aligned boxes (slab method)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo[None] - origin[None, None]) * inv[:, None]
        t2 = (hi[None] - origin[None, None]) * inv[:, None]
    t_near = np.nanmax(np.minimum(t1, t2), axis=-1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=-1)
    valid = (t_near <= t_far) & (t_near > 0)
    s_box = np.where(valid, t_near, np.inf)
    nearest_box = s_box.argmin(axis=1)
    s_box = s_box[np.arange(dirs.shape[0]), nearest_box]

    closer = s_box < dist
    dist = np.where(closer, s_box, dist)
    shade = np.where(closer, albedo[nearest_box], shade)
    return dist, shade


def _lidar_rays(cfg: SceneConfig) -> np.ndarray:
    elevation = np.radians(np.linspace(cfg.fov_down, cfg.fov_up, cfg.beams))
    azimuth = np.linspace(-math.pi, math.pi, cfg.azimuth_samples, endpoint=False)
    el, az = np.meshgrid(elevation, azimuth, indexing="ij")
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1).reshape(-1, 3)


def intrinsics(cfg: SceneConfig) -> np.ndarray:
    return np.array([[cfg.focal, 0.0, cfg.image_width / 2], [0.0, cfg.focal, cfg.image_height / 2], [0.0, 0.0, 1.0]])


def _camera_rays(cfg: SceneConfig) -> np.ndarray:
    """Unit pixel rays in the LiDAR frame, row-major over the raster."""
    py, px = np.meshgrid(np.arange(cfg.image_height), np.arange(cfg.image_width), indexing="ij")
    pix = np.stack([px, py, np.ones_like(px)], axis=-1).reshape(-1, 3).astype(np.float64)
    cam_dirs = pix @ np.linalg.inv(intrinsics(cfg)).T
    lidar_dirs = cam_dirs @ LIDAR_TO_CAMERA_ROTATION
    return lidar_dirs / np.linalg.norm(lidar_dirs, axis=1, keepdims=True)


def _motion(matrix: np.ndarray) -> RigidMotion:
    m = torch.from_numpy(matrix.copy())
    return RigidMotion(matrix_to_quat(m[:3, :3]), m[:3, 3].clone())


def velo_to_cam0() -> RigidMotion:
    matrix = np.eye(4)
    matrix[:3, :3], matrix[:3, 3] = LIDAR_TO_CAMERA_ROTATION, LIDAR_TO_CAMERA_TRANSLATION
    return _motion(matrix)


def projections(cfg: SceneConfig) -> Dict[str, torch.Tensor]:
    """P0..P3 = K [I | 0]: all four rectified cameras coincide with cam0."""
    proj = torch.zeros(3, 4, dtype=torch.float64)
    proj[:, :3] = torch.from_numpy(intrinsics(cfg))
    return {f"P{idx}": proj.clone() for idx in range(4)}


def generate_sequence(cfg: SceneConfig, seed: int, sequence_id: str = "00") -> SequenceBundle:
    rng = np.random.default_rng(seed)
    poses = ego_poses(cfg)
    boxes = _scatter_boxes(cfg, poses, rng)
    lidar_dirs, pixel_dirs = _lidar_rays(cfg), _camera_rays(cfg)
    cam_center = -LIDAR_TO_CAMERA_ROTATION.T @ LIDAR_TO_CAMERA_TRANSLATION

    overwatch.info(f"Ray-casting {cfg.frames} synthetic frames along a `{cfg.path}` path ({cfg.boxes} boxes)")
    frames = []
    for idx, pose in enumerate(poses):
        rot, origin = pose[:3, :3], pose[:3, 3]

        dist, shade = _cast(origin, lidar_dirs @ rot.T, boxes, cfg)
        keep = dist < cfg.max_range
        cloud = PointCloud(points=lidar_dirs[keep] * dist[keep, None], intensity=shade[keep])

        dist, shade = _cast(rot @ cam_center + origin, pixel_dirs @ rot.T, boxes, cfg)
        depth_shading = np.where(np.isfinite(dist), np.exp(-np.nan_to_num(dist, posinf=0.0) / 30.0), 1.0)
        raster = (shade * depth_shading).reshape(cfg.image_height, cfg.image_width, 1)
        frames.append(Frame(cloud=cloud, image=ImageRaster(np.clip(raster, 0.0, 1.0)), timestamp=idx * FRAME_PERIOD))

    camera = CameraModel(
        torch.from_numpy(intrinsics(cfg)), velo_to_cam0(), width=cfg.image_width, height=cfg.image_height
    )
    return SequenceBundle(
        frames=tuple(frames), cameras=(camera,), gt_poses=tuple(_motion(p) for p in poses), sequence_id=sequence_id
    )
