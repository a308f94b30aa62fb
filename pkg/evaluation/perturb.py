"""
perturb.py

Robustness perturbations of a sequence:
    - `half-rate`: keep every other frame (LiDAR scan with its image), ground truth subsampled identically, so
      odometry runs over 0.2 s gaps
    - `gauss:<sigma>`: zero-mean Gaussian noise of std sigma (meters) on every LiDAR coordinate, seeded
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from dataio.kitti import Frame, PointCloud, SequenceBundle, replace_frames
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

PERTURB_MODES = ("half-rate", "gauss:<sigma>")


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbMode:
    kind: str                                               # "half-rate" | "gauss"
    sigma: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "PerturbMode":
        if text == "half-rate":
            return cls("half-rate")
        if text.startswith("gauss:"):
            try:
                sigma = float(text.removeprefix("gauss:"))
            except ValueError:
                raise PerturbationError(f"Bad noise level in `{text}`; expected `gauss:<sigma>`") from None
            if not math.isfinite(sigma) or sigma < 0:
                raise PerturbationError(f"Noise level must be finite and non-negative, got {sigma}")
            return cls("gauss", sigma)
        raise PerturbationError(f"Perturbation `{text}` is not supported; choose one of {', '.join(PERTURB_MODES)}")

    def __str__(self) -> str:
        return self.kind if self.kind == "half-rate" else f"gauss:{self.sigma:g}"


def perturb(bundle: SequenceBundle, mode: Union[PerturbMode, str], seed: int = 0) -> SequenceBundle:
    mode = PerturbMode.parse(mode) if isinstance(mode, str) else mode
    if mode.kind == "half-rate":
        gt = bundle.gt_poses[::2] if bundle.gt_poses is not None else None
        overwatch.info(f"Half-rate perturbation: {len(bundle.frames)} -> {len(bundle.frames[::2])} frames")
        return replace_frames(bundle, bundle.frames[::2], gt)

    if mode.kind != "gauss":
        raise PerturbationError(f"Perturbation `{mode.kind}` is not supported; choose one of {', '.join(PERTURB_MODES)}")
    if mode.sigma == 0:
        return bundle

    rng = np.random.default_rng(seed)
    frames = []
    for frame in bundle.frames:
        noisy = frame.cloud.points + rng.normal(0.0, mode.sigma, size=frame.cloud.points.shape)
        cloud = PointCloud(points=noisy, intensity=frame.cloud.intensity, dropped=frame.cloud.dropped)
        frames.append(Frame(cloud=cloud, image=frame.image, timestamp=frame.timestamp))
    overwatch.info(f"Gaussian perturbation: sigma = {mode.sigma} m on {len(frames)} scans (seed {seed})")
    return replace_frames(bundle, frames, bundle.gt_poses)
