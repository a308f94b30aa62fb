"""
pose.py

Inter-frame correlation and the coarse-to-fine pose cascade:
    - `AttentiveCostVolume`: each source query attends over its K nearest target queries (keys carry the target
      feature and an encoding of the relative position) and embeds the result with an MLP
    - `PoseHead`: learnable per-query mask (softmax over queries) pooling the embeddings into a quaternion and a
      translation
    - `PoseCascade`: one cost volume + head per level; every layer warps the source positions by the running
      estimate, regresses a residual, and composes it onto the prior

Estimates are returned coarsest layer first; a layer's motion maps source-frame points into the target frame.
"""

from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import torch
import torch.nn as nn

from odometry.encoders import QuerySet
from odometry.geom import RigidMotion, compose_residual, quat_normalize
from odometry.layers import basic_init, leaky_mlp, zero_init


# === Domain Types ===
@dataclass(frozen=True)
class CostVolume:
    level: int
    embeddings: torch.Tensor                                # (N_l, D)
    valid: torch.Tensor                                     # (N_l,) bool, validity of the source queries


@dataclass(frozen=True)
class PoseEstimate:
    motion: RigidMotion                                     # rotation is unit-norm (normalized by whoever builds it)
    level: int


class AttentiveCostVolume(nn.Module):
    def __init__(self, channels: int, knn: int, leaky_slope: float = 0.1) -> None:
        super().__init__()
        self.channels, self.knn = channels, knn
        self.scale = channels**-0.5

        self.pos_enc = nn.Linear(3, channels)
        self.q_proj = nn.Linear(channels, channels)
        self.k_proj = nn.Linear(2 * channels, channels)
        self.embed = leaky_mlp(2 * channels + 3, channels, channels, slope=leaky_slope)
        self.apply(basic_init)

    def forward(self, src: QuerySet, tgt: QuerySet) -> CostVolume:
        return attentive_cost_volume(src, tgt, self)


class PoseHead(nn.Module):
    """Masked pooling into (q, t); initialized to the identity motion (zero weights, quaternion bias (1, 0, 0, 0))."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.mask_head = nn.Linear(channels, 1)
        self.q_head = nn.Linear(channels, 4)
        self.t_head = nn.Linear(channels, 3)

        self.apply(basic_init)
        zero_init(self.q_head, bias=torch.tensor([1.0, 0.0, 0.0, 0.0]))
        zero_init(self.t_head)

    def mask(self, cv: CostVolume) -> torch.Tensor:
        """(N,) softmax weights over valid queries; all zero when no query is valid."""
        logits = self.mask_head(cv.embeddings)[:, 0]
        if not cv.valid.any():
            return torch.zeros_like(logits)
        return logits.masked_fill(~cv.valid, float("-inf")).softmax(dim=0)

    def forward(self, cv: CostVolume) -> Tuple[torch.Tensor, torch.Tensor]:
        pooled = (self.mask(cv)[:, None] * cv.embeddings).sum(dim=0)
        return quat_normalize(self.q_head(pooled)), self.t_head(pooled)


# === Correlation ===
def nearest_targets(src_positions: torch.Tensor, tgt: QuerySet, k: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """Indices (N, k') of the k' = min(k, N_t) nearest valid targets per source, ties by target index; plus validity."""
    with torch.no_grad():
        dist = ((src_positions[:, None, :] - tgt.positions[None, :, :]) ** 2).sum(dim=-1)
        dist = dist.masked_fill(~tgt.valid[None, :], float("inf"))
        dist, order = torch.sort(dist, dim=1, stable=True)
    k = min(k, tgt.positions.shape[0])
    return order[:, :k], torch.isfinite(dist[:, :k])


def attentive_cost_volume(src: QuerySet, tgt: QuerySet, cv: AttentiveCostVolume) -> CostVolume:
    assert src.level == tgt.level, f"Cost volume needs one level, got {src.level} and {tgt.level}"
    index, neighbour_valid = nearest_targets(src.positions, tgt, cv.knn)

    relative = tgt.positions[index] - src.positions[:, None, :]                              # (N, K, 3)
    neighbour_feats = tgt.features[index]                                                   # (N, K, D)
    keys = cv.k_proj(torch.cat((neighbour_feats, cv.pos_enc(relative)), dim=-1))
    logits = torch.einsum("nd,nkd->nk", cv.q_proj(src.features), keys) * cv.scale

    # Sources without any valid neighbour keep zeroed correlation slots
    has_neighbour = neighbour_valid.any(dim=1, keepdim=True)
    logits = torch.where(has_neighbour, logits.masked_fill(~neighbour_valid, float("-inf")), torch.zeros_like(logits))
    attn = torch.where(has_neighbour, logits.softmax(dim=1), torch.zeros_like(logits))

    attended = (attn[..., None] * neighbour_feats).sum(dim=1)
    pooled_relative = (attn[..., None] * relative).sum(dim=1)
    embeddings = cv.embed(torch.cat((src.features, attended, pooled_relative), dim=-1))
    return CostVolume(level=src.level, embeddings=embeddings, valid=src.valid)


# === Regression & Refinement ===
def coarse_pose_head(cv: CostVolume, head: PoseHead) -> PoseEstimate:
    q, t = head(cv)
    return PoseEstimate(RigidMotion(q, t), level=cv.level)


def warp_queries(queries: QuerySet, motion: RigidMotion) -> QuerySet:
    return replace(queries, positions=motion.transform(queries.positions))


class PoseCascade(nn.Module):
    def __init__(self, channels: int, knn: int, levels: int, leaky_slope: float = 0.1) -> None:
        super().__init__()
        self.levels = levels
        self.cost_volumes = nn.ModuleList([AttentiveCostVolume(channels, knn, leaky_slope) for _ in range(levels)])
        self.heads = nn.ModuleList([PoseHead(channels) for _ in range(levels)])

    def correlate(self, level: int, src: QuerySet, tgt: QuerySet) -> CostVolume:
        return attentive_cost_volume(src, tgt, self.cost_volumes[level])

    def estimate_layer(self, level: int, src: QuerySet, tgt: QuerySet, prior: RigidMotion) -> PoseEstimate:
        residual = coarse_pose_head(self.correlate(level, warp_queries(src, prior), tgt), self.heads[level])
        return PoseEstimate(compose_residual(residual.motion, prior), level=level)


def refine_layer(
    level: int, src: QuerySet, tgt: QuerySet, prior: PoseEstimate, cascade: PoseCascade
) -> PoseEstimate:
    assert level < prior.level, f"Refinement runs coarse-to-fine; layer {level} cannot refine layer {prior.level}"
    return cascade.estimate_layer(level, src, tgt, prior.motion)


def run_pyramid(
    src: Sequence[QuerySet], tgt: Sequence[QuerySet], initial: PoseEstimate, cascade: PoseCascade
) -> List[PoseEstimate]:
    """
    Run the cascade over per-level query sets (indexed finest first, as the encoders emit them).

    :param initial: prior of the coarsest layer (from the temporal module, or the identity)
    :return: one estimate per layer, coarsest first
    """
    top = cascade.levels - 1
    estimates = [cascade.estimate_layer(top, src[top], tgt[top], initial.motion)]
    for level in reversed(range(top)):
        estimates.append(refine_layer(level, src[level], tgt[level], estimates[-1], cascade))
    return estimates
