import pytest
import torch

from conftest import build_toy_model, random_motion
from odometry.dvlo import estimate_motions
from odometry.geom import RigidMotion, identity_quaternion, quat_normalize
from odometry.pose import CostVolume, PoseEstimate
from odometry.temporal import (
    SENTINEL_TAG,
    MemoryBank,
    SequenceState,
    TemporalEncoder,
    TemporalInteraction,
    cascade_only_update,
    ego_feature_init,
    ego_refine,
    predict_initial_pose,
    step_sequence_state,
    temporal_encode,
    update_refine,
)


# === Memory Banks ===
def test_fresh_bank_holds_a_zero_sentinel():
    state = SequenceState.fresh(ego_dim=8, t_h=30)
    assert state.mfb.tags == state.mpb.tags == [SENTINEL_TAG]
    assert not state.mfb.newest().any() and not state.mpb.newest().any()
    assert state.mpb.stacked().shape == (1, 7)


def test_bank_keeps_the_newest_entries(generator):
    state = SequenceState.fresh(ego_dim=8, t_h=30)
    for _ in range(35):
        step_sequence_state(state, torch.randn(8, generator=generator, dtype=torch.float64), random_motion(generator))
    assert len(state.mfb) == len(state.mpb) == 30
    assert state.mpb.tags == list(range(5, 35))
    assert state.step == 35


def test_bank_window_before_eviction(generator):
    state = SequenceState.fresh(ego_dim=4, t_h=5)
    for _ in range(3):
        step_sequence_state(state, torch.ones(4, dtype=torch.float64), random_motion(generator))
    assert state.mfb.tags == [SENTINEL_TAG, 0, 1, 2]

    state.mfb.reset()
    assert state.mfb.tags == [SENTINEL_TAG]


def test_sequence_state_restores_into_a_fresh_state(generator):
    state = SequenceState.fresh(ego_dim=4, t_h=5)
    for _ in range(7):
        step_sequence_state(state, torch.randn(4, generator=generator, dtype=torch.float64), random_motion(generator))

    restored = SequenceState.fresh(ego_dim=4, t_h=5).load_state_dict(state.state_dict())
    assert restored.step == 7 and restored.mpb.tags == state.mpb.tags == [2, 3, 4, 5, 6]
    assert torch.equal(restored.mfb.stacked(), state.mfb.stacked())
    assert torch.equal(restored.mpb.stacked(), state.mpb.stacked())

    with pytest.raises(ValueError, match="holds 3 entries"):
        MemoryBank(dim=4, capacity=3).load_state_dict(state.mfb.state_dict())


def test_bank_stores_detached_copies():
    bank = MemoryBank(dim=3, capacity=4)
    entry = torch.ones(3, dtype=torch.float64, requires_grad=True)
    bank.push(entry * 2.0, tag=0)
    assert not bank.newest().requires_grad
    assert bank.newest().tolist() == [2.0, 2.0, 2.0]


def test_bank_rejects_wrong_shapes():
    bank = MemoryBank(dim=3, capacity=4)
    with pytest.raises(ValueError, match="3-vectors"):
        bank.push(torch.ones(4, dtype=torch.float64), tag=0)


def test_pose_bank_packs_rotation_then_translation(generator):
    state = SequenceState.fresh(ego_dim=4, t_h=3)
    motion = random_motion(generator)
    step_sequence_state(state, torch.zeros(4, dtype=torch.float64), motion)
    assert torch.equal(state.mpb.rotations[-1], motion.rotation)
    assert torch.equal(state.mpb.translations[-1], motion.translation)


# === Residual-Identity Heads ===
@pytest.fixture
def temporal() -> TemporalInteraction:
    torch.manual_seed(0)
    return TemporalInteraction(channels=16, ego_dim=16, heads=4).to(torch.float64)


def test_initial_pose_prediction_starts_at_identity(temporal, generator):
    state = SequenceState.fresh(ego_dim=16, t_h=4)
    step_sequence_state(state, torch.randn(16, generator=generator, dtype=torch.float64), random_motion(generator))
    ego = ego_refine(torch.randn(16, generator=generator, dtype=torch.float64), state.mfb, temporal)

    initial = predict_initial_pose(ego, temporal_encode(state.mpb, temporal), temporal, level=3)
    assert initial.level == 3
    assert torch.equal(initial.motion.rotation, identity_quaternion())
    assert not initial.motion.translation.any()


def test_update_starts_as_a_no_op(temporal, generator):
    state = SequenceState.fresh(ego_dim=16, t_h=4)
    last = PoseEstimate(random_motion(generator), level=0)
    refined = update_refine(last, temporal_encode(state.mpb, temporal), temporal)
    assert torch.equal(refined.motion.rotation, cascade_only_update(last).motion.rotation)
    assert torch.equal(refined.motion.translation, last.motion.translation)

    with pytest.raises(AssertionError):
        update_refine(PoseEstimate(last.motion, level=1), temporal_encode(state.mpb, temporal), temporal)


def test_ego_feature_without_valid_queries_is_the_projection_bias(temporal, generator):
    cv = CostVolume(3, torch.randn(5, 16, generator=generator, dtype=torch.float64), torch.zeros(5, dtype=torch.bool))
    assert torch.equal(ego_feature_init(cv, temporal), temporal.ego_proj.bias)


def test_temporal_encoder_output(generator):
    torch.manual_seed(0)
    encoder = TemporalEncoder(4, 16, heads=4).to(torch.float64)
    history = quat_normalize(torch.randn(6, 4, generator=generator, dtype=torch.float64))
    assert encoder(history).shape == (16,)
    assert torch.isfinite(encoder(history)).all()


def test_untrained_temporal_module_matches_cascade_only(synth_bundle):
    frames = synth_bundle.frames[:4]
    with_temporal = build_toy_model()
    cascade_only = build_toy_model(enabled=False)
    cascade_only.load_state_dict(with_temporal.state_dict())

    a = estimate_motions(with_temporal, frames, synth_bundle.cameras)
    b = estimate_motions(cascade_only, frames, synth_bundle.cameras)
    assert len(a) == len(b) == 3
    for x, y in zip(a, b):
        assert torch.equal(x.rotation, y.rotation)
        assert torch.equal(x.translation, y.translation)


def test_forward_fills_the_banks(synth_bundle):
    model = build_toy_model()
    state = model.init_state()
    with torch.no_grad():
        outputs = model(synth_bundle.frames[:5], synth_bundle.cameras, state)
    assert len(outputs) == 4
    assert state.step == 4
    assert state.mpb.tags == [SENTINEL_TAG, 0, 1, 2, 3]
    assert isinstance(outputs[-1].refined.motion, RigidMotion)
