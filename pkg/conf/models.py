"""
models.py

Draccus Dataclass Definition for a ModelConfig object, with registered subclasses for each model scale. A given model
variant configures the following attributes:
    - Cylindrical pseudo-image geometry (bins and angular resolution)
    - Encoder widths, pyramid depth, and per-level LiDAR query counts
    - Sparse query fusion (sampling points, heads, global fusion, ablation switch)
    - Pose cascade (nearest-neighbour count of the attentive cost volume)
    - Temporal interaction/update (history length, ego-feature width, heads, ablation switch)

Per-level lists (`query_counts`) are ordered coarsest level first.
"""

import math
from dataclasses import dataclass, field
from enum import Enum, unique
from typing import Tuple

from draccus import ChoiceRegistry


@dataclass
class PseudoImageConfig:
    # fmt: off
    h: int = 32                                             # Vertical bins (H_P)
    w: int = 128                                            # Horizontal bins (W_P)
    delta_theta: float = 2 * math.pi / 128                  # Radians per horizontal bin (full 360 degree sweep)
    delta_phi: float = math.radians(1.0)                    # Radians per vertical bin
    phi_center: float = 0.0                                 # Elevation (radians) mapped onto the center row
    # fmt: on


@dataclass
class EncoderConfig:
    # fmt: off
    channels: int = 16                                      # Point feature width D == image feature width C
    levels: int = 4                                         # Pyramid depth L
    query_counts: Tuple[int, ...] = (8, 16, 32, 64)         # Queries per level, coarsest first
    image_channels: int = 3                                 # Raster channels fed to the image branch (gray is repeated)
    leaky_slope: float = 0.1                                # Leaky-rectifier slope used throughout the encoders
    # fmt: on


@dataclass
class FusionConfig:
    # fmt: off
    enabled: bool = True                                    # Sparse query fusion on/off (off => LiDAR-only ablation)
    samples_per_query: int = 4                              # Sampling points M per query per camera
    heads: int = 4                                          # Cross-attention heads (head dim = D / heads)
    enable_global: bool = True                              # Global adaptive fusion on/off
    # fmt: on


@dataclass
class PoseConfig:
    # fmt: off
    knn: int = 8                                            # K nearest target queries in the attentive cost volume
    levels: int = 4                                         # Cascade layers (must equal `encoder.levels`)
    # fmt: on


@dataclass
class TemporalConfig:
    # fmt: off
    enabled: bool = True                                    # Temporal interaction & update on/off (off => cascade-only)
    t_h: int = 30                                           # Memory bank capacity T_h
    ego_dim: int = 64                                       # Ego-feature width D_e
    heads: int = 4                                          # Heads of the history self-attention / ego cross-attention
    # fmt: on


@dataclass
class ModelConfig(ChoiceRegistry):
    # fmt: off
    model_id: str                                           # Unique Model ID that fully specifies a model variant
    dtype: str = "float64"                                  # Compute dtype (`float64` keeps gradient checks meaningful)

    pseudo_image: PseudoImageConfig = field(default_factory=PseudoImageConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    pose: PoseConfig = field(default_factory=PoseConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    # fmt: on

    def __post_init__(self) -> None:
        assert self.encoder.levels >= 1, "Need at least one pyramid level!"
        assert (
            len(self.encoder.query_counts) == self.encoder.levels
        ), f"Expected {self.encoder.levels} query counts, got {self.encoder.query_counts}"
        assert self.pose.levels == self.encoder.levels, "Pose cascade depth must match the encoder pyramid depth!"
        assert self.encoder.channels % self.fusion.heads == 0, "Fusion heads must evenly divide `encoder.channels`!"
        assert self.temporal.ego_dim % self.temporal.heads == 0, "Temporal heads must evenly divide `ego_dim`!"
        assert self.temporal.t_h >= 1, "Memory banks need a capacity of at least one entry!"
        assert self.pose.knn >= 1, "Cost volume needs at least one neighbour!"


# === Toy Scale (desk-sized; every test & acceptance run uses this) ===
@dataclass
class DVLO4D_Toy(ModelConfig):
    model_id: str = "dvlo4d-toy"


# === Full Scale (KITTI-resolution pseudo-image, full query counts) ===
@dataclass
class DVLO4D_Full(ModelConfig):
    model_id: str = "dvlo4d-full"

    pseudo_image: PseudoImageConfig = field(
        default_factory=lambda: PseudoImageConfig(
            h=64,
            w=1792,
            delta_theta=2 * math.pi / 1792,
            delta_phi=math.radians(28.0 / 64),
            phi_center=math.radians(-11.0),
        )
    )
    encoder: EncoderConfig = field(
        default_factory=lambda: EncoderConfig(channels=64, query_counts=(116, 228, 904, 3600))
    )


# === Define a Model Registry Enum for Reference & Validation ===
@unique
class ModelRegistry(Enum):
    DVLO4D_TOY = DVLO4D_Toy
    DVLO4D_FULL = DVLO4D_Full

    @property
    def model_id(self) -> str:
        return self.value.model_id


# Register Models in Choice Registry
for model_variant in ModelRegistry:
    ModelConfig.register_subclass(model_variant.model_id, model_variant.value)
