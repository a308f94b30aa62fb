import dataclasses

import pytest
import torch

from conftest import F64, front_positions, make_queries, random_motion
from odometry.geom import RigidMotion, identity_quaternion
from odometry.pose import (
    AttentiveCostVolume,
    CostVolume,
    PoseCascade,
    PoseEstimate,
    PoseHead,
    attentive_cost_volume,
    coarse_pose_head,
    nearest_targets,
    refine_layer,
    run_pyramid,
    warp_queries,
)

CHANNELS = 16


def test_nearest_targets_skip_padding(generator):
    positions = torch.tensor([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.5, 0.0, 0.0]], dtype=F64)
    targets = dataclasses.replace(make_queries(positions, CHANNELS, generator), valid=torch.tensor([1, 1, 1, 0]).bool())
    index, valid = nearest_targets(torch.zeros(1, 3, dtype=torch.float64), targets, k=3)
    assert index.tolist() == [[0, 1, 2]]
    assert valid.all()

    index, valid = nearest_targets(torch.zeros(1, 3, dtype=torch.float64), targets, k=10)
    assert index.shape == (1, 4)
    assert valid.tolist() == [[True, True, True, False]]


def test_cost_volume_without_valid_targets_is_finite(generator):
    torch.manual_seed(0)
    cv = AttentiveCostVolume(CHANNELS, knn=4).to(torch.float64)
    src = make_queries(front_positions(generator, 5), CHANNELS, generator)
    tgt = dataclasses.replace(src, valid=torch.zeros(5, dtype=torch.bool))
    volume = attentive_cost_volume(src, tgt, cv)
    assert volume.embeddings.shape == (5, CHANNELS)
    assert torch.isfinite(volume.embeddings).all()


def test_pose_head_starts_at_identity(generator):
    head = PoseHead(CHANNELS).to(torch.float64)
    cv = CostVolume(0, torch.randn(7, CHANNELS, generator=generator, dtype=torch.float64), torch.arange(7) < 4)
    estimate = coarse_pose_head(cv, head)
    assert torch.equal(estimate.motion.rotation, identity_quaternion())
    assert not estimate.motion.translation.any()

    weights = head.mask(cv)
    assert weights[:4].sum().item() == pytest.approx(1.0)
    assert not weights[4:].any()
    assert not head.mask(dataclasses.replace(cv, valid=torch.zeros(7, dtype=torch.bool))).any()


def test_warp_queries(generator):
    queries = make_queries(front_positions(generator, 4), CHANNELS, generator)
    motion = random_motion(generator)
    warped = warp_queries(queries, motion)
    assert torch.allclose(warped.positions, motion.transform(queries.positions))
    assert torch.equal(warped.features, queries.features)


def test_cascade_runs_coarse_to_fine(generator):
    torch.manual_seed(0)
    cascade = PoseCascade(CHANNELS, knn=4, levels=3).to(torch.float64)
    src = [make_queries(front_positions(generator, n), CHANNELS, generator, lvl) for lvl, n in enumerate((16, 8, 4))]
    tgt = [make_queries(front_positions(generator, n), CHANNELS, generator, lvl) for lvl, n in enumerate((16, 8, 4))]

    estimates = run_pyramid(src, tgt, PoseEstimate(RigidMotion.identity(), level=2), cascade)
    assert [estimate.level for estimate in estimates] == [2, 1, 0]
    for estimate in estimates:
        assert torch.equal(estimate.motion.rotation, identity_quaternion())
        assert not estimate.motion.translation.any()

    with pytest.raises(AssertionError):
        refine_layer(1, src[1], tgt[1], estimates[-1], cascade)


def test_cascade_composes_residuals_onto_the_prior(generator):
    torch.manual_seed(0)
    cascade = PoseCascade(CHANNELS, knn=4, levels=2).to(torch.float64)
    src = [make_queries(front_positions(generator, n), CHANNELS, generator, level=lvl) for lvl, n in enumerate((8, 4))]
    prior = random_motion(generator)

    estimates = run_pyramid(src, src, PoseEstimate(prior, level=1), cascade)
    for estimate in estimates:
        assert torch.allclose(estimate.motion.rotation, prior.rotation, atol=1e-12)
        assert torch.allclose(estimate.motion.translation, prior.translation, atol=1e-12)
