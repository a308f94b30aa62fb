"""
conftest.py

Shared fixtures: a seeded toy-scale model, a short synthetic sequence, and the same sequence written to disk in the
KITTI layout.
"""

import dataclasses
from pathlib import Path

import pytest
import torch

from conf import ModelConfig, ModelRegistry
from dataio.kitti import SequenceBundle, write_sequence
from dataio.synth import SceneConfig, generate_sequence, projections, velo_to_cam0
from odometry.dvlo import DVLO4D
from odometry.encoders import FeatureMap, QuerySet
from odometry.geom import CameraModel, RigidMotion, quat_normalize
from util import set_global_seed

SEED = 7
F64 = torch.float64


def toy_config(**temporal_overrides: bool) -> ModelConfig:
    cfg = ModelConfig.get_choice_class(ModelRegistry.DVLO4D_TOY.model_id)()
    if temporal_overrides:
        cfg = dataclasses.replace(cfg, temporal=dataclasses.replace(cfg.temporal, **temporal_overrides))
    return cfg


def build_toy_model(seed: int = SEED, **temporal_overrides: bool) -> DVLO4D:
    set_global_seed(seed)
    return DVLO4D(toy_config(**temporal_overrides))


def random_motion(generator: torch.Generator, scale: float = 1.0) -> RigidMotion:
    rotation = quat_normalize(torch.randn(4, generator=generator, dtype=torch.float64))
    return RigidMotion(rotation, scale * torch.randn(3, generator=generator, dtype=torch.float64))


def pinhole_camera(width: int = 32, height: int = 16, focal: float = 16.0) -> CameraModel:
    intrinsics = torch.tensor([[focal, 0.0, width / 2], [0.0, focal, height / 2], [0.0, 0.0, 1.0]], dtype=torch.float64)
    return CameraModel(intrinsics, RigidMotion.identity(), width=width, height=height)


def make_queries(positions: torch.Tensor, channels: int, generator: torch.Generator, level: int = 0) -> QuerySet:
    count = positions.shape[0]
    return QuerySet(
        level=level,
        positions=positions,
        features=torch.randn(count, channels, generator=generator, dtype=torch.float64),
        pixel_anchors=torch.zeros(count, 2, dtype=torch.long),
        valid=torch.ones(count, dtype=torch.bool),
    )


def front_positions(generator: torch.Generator, count: int, sign: float = 1.0) -> torch.Tensor:
    """Points 2-6 m along +z (or -z) of `pinhole_camera`, inside its field of view."""
    depth = 2.0 + 4.0 * torch.rand(count, generator=generator, dtype=torch.float64)
    lateral = 0.4 * (2.0 * torch.rand(count, 2, generator=generator, dtype=torch.float64) - 1.0) * depth[:, None]
    return torch.cat((lateral, sign * depth[:, None]), dim=-1)


def feature_map(generator: torch.Generator, channels: int, height: int = 8, width: int = 16) -> FeatureMap:
    return FeatureMap(0, torch.randn(height, width, channels, generator=generator, dtype=torch.float64), stride=2)


@pytest.fixture
def generator() -> torch.Generator:
    return torch.Generator().manual_seed(SEED)


@pytest.fixture
def toy_model() -> DVLO4D:
    return build_toy_model()


@pytest.fixture(scope="session")
def scene() -> SceneConfig:
    return SceneConfig(frames=10, boxes=12)


@pytest.fixture(scope="session")
def synth_bundle(scene: SceneConfig) -> SequenceBundle:
    return generate_sequence(scene, SEED, sequence_id="00")


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory: pytest.TempPathFactory, synth_bundle: SequenceBundle, scene: SceneConfig) -> Path:
    root = tmp_path_factory.mktemp("synth")
    write_sequence(synth_bundle, root, projections(scene), velo_to_cam0())
    return root
