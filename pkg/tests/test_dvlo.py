import dataclasses

import pytest
import torch

from conftest import SEED, build_toy_model, toy_config
from odometry.dvlo import DVLO4D, StageTimer, estimate_motions, profile_stages
from odometry.load import (
    CheckpointError,
    load_checkpoint,
    load_model,
    model_config_from_dict,
    model_config_to_dict,
    save_checkpoint,
    verify_manifest,
)
from util import set_global_seed


def test_forward_shapes(synth_bundle):
    model = build_toy_model()
    with torch.no_grad():
        outputs = model(synth_bundle.frames[:3], synth_bundle.cameras)
    assert len(outputs) == 2
    for output in outputs:
        assert [estimate.level for estimate in output.estimates] == [3, 2, 1, 0]
        assert output.refined.level == 0
        assert output.ego.shape == (model.cfg.temporal.ego_dim,)
        assert torch.linalg.vector_norm(output.refined.motion.rotation).item() == pytest.approx(1.0)


def test_estimates_are_seeded_and_deterministic(synth_bundle):
    frames = synth_bundle.frames[:4]
    a = estimate_motions(build_toy_model(), frames, synth_bundle.cameras)
    b = estimate_motions(build_toy_model(), frames, synth_bundle.cameras)
    for x, y in zip(a, b):
        assert torch.equal(x.rotation, y.rotation)
        assert torch.equal(x.translation, y.translation)


def test_single_frame_has_no_motions(synth_bundle):
    assert estimate_motions(build_toy_model(), synth_bundle.frames[:1], synth_bundle.cameras) == []


def test_gradients_reach_every_stage(synth_bundle):
    model = build_toy_model()
    for head in model.cascade.heads:
        torch.nn.init.normal_(head.q_head.weight, std=0.1)
        torch.nn.init.normal_(head.t_head.weight, std=0.1)

    outputs = model(synth_bundle.frames[:3], synth_bundle.cameras)
    loss = sum(o.refined.motion.translation.sum() + o.estimates[0].motion.rotation.sum() for o in outputs)
    loss.backward()
    for module in (model.point_encoder, model.image_encoder, model.fusions, model.cascade):
        assert any(p.grad is not None and p.grad.abs().sum() > 0 for p in module.parameters())


def test_stage_profile(synth_bundle):
    medians = profile_stages(build_toy_model(), synth_bundle.frames, synth_bundle.cameras, runs=2)
    assert set(medians) == {"encode", "fuse", "temporal", "cascade", "update"}
    assert all(value >= 0 for value in medians.values())

    timer = StageTimer()
    with timer.stage("x"):
        pass
    assert list(timer.medians()) == ["x"]


# === Checkpoints ===
def test_checkpoint_round_trip(tmp_path, synth_bundle):
    model = build_toy_model(seed=3)
    path = save_checkpoint(tmp_path / "checkpoints" / "model.pt", model, epoch=2, global_step=11)

    loaded, raw = load_model(path)
    assert (raw["epoch"], raw["global_step"]) == (2, 11)
    assert loaded.cfg == model.cfg
    frames = synth_bundle.frames[:3]
    a = estimate_motions(model, frames, synth_bundle.cameras)
    b = estimate_motions(loaded, frames, synth_bundle.cameras)
    for x, y in zip(a, b):
        assert torch.equal(x.rotation, y.rotation)
        assert torch.equal(x.translation, y.translation)


def test_checkpoint_keeps_the_camera_count(tmp_path):
    set_global_seed(SEED)
    model = DVLO4D(toy_config(), num_cameras=2)
    loaded, raw = load_model(save_checkpoint(tmp_path / "two-cameras.pt", model))
    assert raw["num_cameras"] == loaded.num_cameras == 2
    assert loaded.fusions[0].offset_head.out_features == model.fusions[0].offset_head.out_features
    for (name, a), b in zip(model.state_dict().items(), loaded.state_dict().values()):
        assert torch.equal(a, b), name


def test_config_round_trip_keeps_overrides():
    cfg = toy_config()
    cfg = dataclasses.replace(cfg, encoder=dataclasses.replace(cfg.encoder, channels=8, query_counts=(4, 8, 8, 16)))
    restored = model_config_from_dict(model_config_to_dict(cfg))
    assert restored == cfg
    assert restored.encoder.query_counts == (4, 8, 8, 16)


def test_manifest_mismatch_is_rejected(tmp_path):
    model = build_toy_model()
    small = dataclasses.replace(model.cfg, encoder=dataclasses.replace(model.cfg.encoder, channels=8))
    with pytest.raises(CheckpointError):
        verify_manifest(DVLO4D(small), load_checkpoint(save_checkpoint(tmp_path / "m.pt", model))["manifest"])


def test_missing_or_incomplete_checkpoints(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "nothing.pt")

    torch.save({"model": {}}, tmp_path / "partial.pt")
    with pytest.raises(CheckpointError, match="manifest"):
        load_checkpoint(tmp_path / "partial.pt")
