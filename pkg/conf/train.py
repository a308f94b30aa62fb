"""
train.py

Draccus dataclasses for the data source and the optimization schedule. Defaults are the full-scale training setup:
Adam (0.9, 0.999) at 1e-3 with exponential decay every 13 epochs down to 1e-5, clips of 60 frames split into sub-clips
of 3, layer weights (1.6, 0.8, 0.4, 0.8) ordered coarsest layer first, refined weight 0.8, and learnable loss scales
initialized at k_t = 0.0, k_q = -2.5.
"""

from dataclasses import dataclass
from typing import Optional, Tuple


@dataclass
class DataConfig:
    # fmt: off
    camera: str = "P2"                                      # Calibration key of the camera to use (left color)
    gt_frame: str = "lidar"                                 # Frame of `poses/<seq>.txt`: "lidar" | "camera" (KITTI)
    # fmt: on

    def __post_init__(self) -> None:
        assert self.gt_frame in {"lidar", "camera"}, f"Ground-truth frame `{self.gt_frame}` is not supported!"


@dataclass
class TrainingConfig:
    # fmt: off
    train_strategy: str = "clip-cal"                        # Train Strategy (see `training/materialize.py`)
    lr: float = 1e-3                                        # Initial learning rate
    adam_betas: Tuple[float, float] = (0.9, 0.999)          # Adam moment coefficients
    decay_factor: float = 0.8                               # Exponential decay factor per period
    decay_every: int = 13                                   # Decay period in epochs
    lr_floor: float = 1e-5                                  # Learning rate never decays below this value

    epochs: int = 1                                         # Epochs to run (in case `max_steps` is not specified)
    max_steps: Optional[int] = None                         # [Optional] Max gradient steps (overrides `epochs`)
    save_interval: Optional[int] = None                     # [Optional] Extra checkpoint every N steps

    t_c: int = 60                                           # Clip length T_C (frame pairs); banks reset per clip
    t_s: int = 3                                            # Sub-clip length T_s; one optimizer step per sub-clip
    shuffle_clips: bool = True                              # Shuffle clip order per epoch (seeded by seed + epoch)

    alpha: Tuple[float, ...] = (1.6, 0.8, 0.4, 0.8)         # Layer weights, coarsest layer first
    beta: float = 0.8                                       # Refined-pose weight
    k_t0: float = 0.0                                       # Initial learnable translation scale
    k_q0: float = -2.5                                      # Initial learnable rotation scale
    # fmt: on

    def __post_init__(self) -> None:
        assert self.lr >= 0.0, "Learning rate must be non-negative!"
        assert self.decay_every >= 1, "Decay period must be at least one epoch!"
        assert self.epochs >= 0, "Epoch count must be non-negative!"
