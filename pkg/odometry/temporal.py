"""
temporal.py

Temporal interaction & update: fixed-capacity FIFO memory banks of past ego features and refined poses, a
self-attention + LSTM encoder over the pose history, ego-feature refinement against the feature bank, prediction of
the coarsest layer's initial pose, and the final update of the finest layer's estimate.

Heads are residual-identity at initialization: the predicted initial pose is the identity and the update returns the
cascade output unchanged, so an untrained temporal module leaves the trajectory bit-identical to the cascade alone.
"""

from collections import deque
from dataclasses import dataclass
from typing import Any, Deque, Dict, List, Tuple

import torch
import torch.nn as nn
from timm.models.vision_transformer import Attention

from odometry.geom import RigidMotion, quat_normalize
from odometry.layers import CrossAttention, basic_init, leaky_mlp, sinusoidal_embedding, zero_init
from odometry.pose import CostVolume, PoseEstimate

SENTINEL_TAG = -1


# === Memory Banks ===
class MemoryBank:
    """FIFO window of (tag, vector) entries; starts with one zero sentinel that is evicted like any other entry."""

    def __init__(self, dim: int, capacity: int, dtype: torch.dtype = torch.float64) -> None:
        assert capacity >= 1, "Memory bank capacity must be at least one entry!"
        self.dim, self.capacity, self.dtype = dim, capacity, dtype
        self.history: Deque[Tuple[int, torch.Tensor]] = deque(maxlen=capacity)
        self.reset()

    def reset(self) -> None:
        self.history.clear()
        self.history.append((SENTINEL_TAG, torch.zeros(self.dim, dtype=self.dtype)))

    def push(self, entry: torch.Tensor, tag: int) -> "MemoryBank":
        if entry.shape != (self.dim,):
            raise ValueError(f"Memory bank stores {self.dim}-vectors, got an entry of shape {tuple(entry.shape)}")
        self.history.append((tag, entry.detach().clone().to(self.dtype)))
        return self

    @property
    def tags(self) -> List[int]:
        return [tag for tag, _ in self.history]

    def stacked(self) -> torch.Tensor:
        """(len, dim) entries, oldest first."""
        return torch.stack([entry for _, entry in self.history])

    def newest(self) -> torch.Tensor:
        return self.history[-1][1]

    def state_dict(self) -> Dict[str, Any]:
        return {"tags": self.tags, "entries": self.stacked().clone()}

    def load_state_dict(self, state: Dict[str, Any]) -> "MemoryBank":
        if len(state["tags"]) > self.capacity:
            raise ValueError(f"Memory bank holds {self.capacity} entries, state has {len(state['tags'])}")
        self.history.clear()
        for tag, entry in zip(state["tags"], state["entries"]):
            self.history.append((int(tag), entry.clone().to(self.dtype)))
        return self

    def __len__(self) -> int:
        return len(self.history)


class MemoryFeatureBank(MemoryBank):
    pass


class MemoryPoseBank(MemoryBank):
    """Entries are refined poses packed as (q_w, q_x, q_y, q_z, t_x, t_y, t_z); the sentinel is all zeros."""

    def __init__(self, capacity: int, dtype: torch.dtype = torch.float64) -> None:
        super().__init__(7, capacity, dtype)

    @property
    def rotations(self) -> torch.Tensor:
        return self.stacked()[:, :4]

    @property
    def translations(self) -> torch.Tensor:
        return self.stacked()[:, 4:]


def bank_push(bank: MemoryBank, entry: torch.Tensor, tag: int) -> MemoryBank:
    return bank.push(entry, tag)


@dataclass
class SequenceState:
    """Temporal state of one clip; single owner, reset at clip boundaries."""

    mfb: MemoryFeatureBank
    mpb: MemoryPoseBank
    step: int = 0

    @classmethod
    def fresh(cls, ego_dim: int, t_h: int, dtype: torch.dtype = torch.float64) -> "SequenceState":
        return cls(MemoryFeatureBank(ego_dim, t_h, dtype), MemoryPoseBank(t_h, dtype))

    def state_dict(self) -> Dict[str, Any]:
        return {"mfb": self.mfb.state_dict(), "mpb": self.mpb.state_dict(), "step": self.step}

    def load_state_dict(self, state: Dict[str, Any]) -> "SequenceState":
        self.mfb.load_state_dict(state["mfb"])
        self.mpb.load_state_dict(state["mpb"])
        self.step = state["step"]
        return self


def step_sequence_state(state: SequenceState, ego: torch.Tensor, refined: RigidMotion) -> SequenceState:
    bank_push(state.mfb, ego, state.step)
    bank_push(state.mpb, torch.cat((refined.rotation, refined.translation)), state.step)
    state.step += 1
    return state


# === Learned Components ===
@dataclass(frozen=True)
class TemporalEncoding:
    q_enc: torch.Tensor                                     # (D_e,)
    t_enc: torch.Tensor                                     # (D_e,)


class TemporalEncoder(nn.Module):
    """Linear lift + sinusoidal history-index encoding -> one self-attention layer -> single-layer LSTM."""

    def __init__(self, in_features: int, dim: int, heads: int) -> None:
        super().__init__()
        self.dim = dim
        self.lift = nn.Linear(in_features, dim)
        self.attn = Attention(dim, num_heads=heads, qkv_bias=True)
        self.lstm = nn.LSTM(dim, dim, num_layers=1, batch_first=True)
        self.lift.apply(basic_init)

    def forward(self, history: torch.Tensor) -> torch.Tensor:
        """:param history: (T, in_features), oldest first; returns the final LSTM hidden state (dim,)"""
        positions = torch.arange(history.shape[0], dtype=history.dtype)
        x = self.lift(history) + sinusoidal_embedding(positions, self.dim)
        x = self.attn(x[None])
        _, (h_n, _) = self.lstm(x)
        return h_n[-1, 0]


class TemporalInteraction(nn.Module):
    def __init__(self, channels: int, ego_dim: int, heads: int, leaky_slope: float = 0.1) -> None:
        super().__init__()
        self.ego_dim = ego_dim
        self.ego_proj = nn.Linear(channels, ego_dim)
        self.ego_attention = CrossAttention(ego_dim, heads)
        self.q_encoder = TemporalEncoder(4, ego_dim, heads)
        self.t_encoder = TemporalEncoder(3, ego_dim, heads)

        # Interaction =>> initial pose of the coarsest layer
        self.predict_q = leaky_mlp(2 * ego_dim, ego_dim, 4, slope=leaky_slope)
        self.predict_t = leaky_mlp(2 * ego_dim, ego_dim, 3, slope=leaky_slope)

        # Update =>> residual refinement of the finest layer
        self.lift_q = leaky_mlp(4, ego_dim, ego_dim, slope=leaky_slope)
        self.lift_t = leaky_mlp(3, ego_dim, ego_dim, slope=leaky_slope)
        self.update_q = leaky_mlp(2 * ego_dim, ego_dim, 4, slope=leaky_slope)
        self.update_t = leaky_mlp(2 * ego_dim, ego_dim, 3, slope=leaky_slope)

        for module in (self.ego_proj, self.ego_attention, self.predict_q, self.predict_t):
            module.apply(basic_init)
        for module in (self.lift_q, self.lift_t, self.update_q, self.update_t):
            module.apply(basic_init)
        zero_init(self.predict_q.fc2, bias=torch.tensor([1.0, 0.0, 0.0, 0.0]))
        zero_init(self.predict_t.fc2)
        zero_init(self.update_q.fc2)
        zero_init(self.update_t.fc2)


def ego_feature_init(cv: CostVolume, temporal: TemporalInteraction) -> torch.Tensor:
    """Mean-pool the coarsest embeddings over valid queries (zeros if none), then project to D_e."""
    weights = cv.valid.to(cv.embeddings.dtype)
    pooled = (weights[:, None] * cv.embeddings).sum(dim=0) / weights.sum().clamp(min=1.0)
    return temporal.ego_proj(pooled)


def temporal_encode(mpb: MemoryPoseBank, temporal: TemporalInteraction) -> TemporalEncoding:
    history = mpb.stacked()
    return TemporalEncoding(q_enc=temporal.q_encoder(history[:, :4]), t_enc=temporal.t_encoder(history[:, 4:]))


def ego_refine(current: torch.Tensor, mfb: MemoryFeatureBank, temporal: TemporalInteraction) -> torch.Tensor:
    """The current ego feature is the single query over the bank entries; residual-added."""
    attended = temporal.ego_attention(current[None, None, :], mfb.stacked().to(current.dtype)[None])
    return current + attended[0, 0]


def predict_initial_pose(
    ego: torch.Tensor, enc: TemporalEncoding, temporal: TemporalInteraction, level: int
) -> PoseEstimate:
    q = quat_normalize(temporal.predict_q(torch.cat((ego, enc.q_enc))))
    t = temporal.predict_t(torch.cat((ego, enc.t_enc)))
    return PoseEstimate(RigidMotion(q, t), level=level)


def update_refine(last: PoseEstimate, enc: TemporalEncoding, temporal: TemporalInteraction) -> PoseEstimate:
    assert last.level == 0, f"The update stage refines the finest layer, got layer {last.level}"
    q0, t0 = last.motion.rotation, last.motion.translation
    q_re = quat_normalize(q0 + temporal.update_q(torch.cat((temporal.lift_q(q0), enc.q_enc))))
    t_re = t0 + temporal.update_t(torch.cat((temporal.lift_t(t0), enc.t_enc)))
    return PoseEstimate(RigidMotion(q_re, t_re), level=0)


def cascade_only_update(last: PoseEstimate) -> PoseEstimate:
    """The update stage with the temporal module switched off."""
    return PoseEstimate(RigidMotion(quat_normalize(last.motion.rotation), last.motion.translation), level=0)
