"""
synth.py

`dvlo4d synth`: write a seeded synthetic plane-and-box sequence in the KITTI layout (LiDAR scans, rasters, calibration,
timestamps, exact ground-truth poses in the LiDAR frame), so every other command runs without real data.
"""

from dataclasses import dataclass, field
from pathlib import Path

from dataio.kitti import IMAGE_DIRS, KittiFormatError, write_sequence
from dataio.synth import SceneConfig, generate_sequence, projections, velo_to_cam0
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


@dataclass
class SynthConfig:
    # fmt: off
    out: Path = Path("data/synth")                          # Dataset root to write into
    seq: str = "00"                                         # Sequence id
    seed: int = 7                                           # Scene seed (box layout)
    camera: str = "P2"                                      # Calibration key the rasters are written for
    scene: SceneConfig = field(default_factory=SceneConfig)
    # fmt: on


def synth(cfg: SynthConfig) -> int:
    if cfg.camera not in IMAGE_DIRS:
        raise KittiFormatError(f"Camera key `{cfg.camera}` is not supported; choose one of {sorted(IMAGE_DIRS)}")
    bundle = generate_sequence(cfg.scene, cfg.seed, sequence_id=cfg.seq)
    seq_dir = write_sequence(bundle, cfg.out, projections(cfg.scene), velo_to_cam0(), camera=cfg.camera)
    overwatch.info(f"Wrote {len(bundle)} synthetic frames to `{seq_dir}`")
    return 0
