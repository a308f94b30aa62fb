"""
fusion.py

Sparse query fusion: every LiDAR query is projected into each camera, predicts a handful of sampling offsets and
normalized weights around its projection, bilinearly samples the image feature map at those locations, and attends
over the sampled tokens. A global pooled image feature is then gated in per query. Queries that do not project into
any camera (the fusion mask) pass through bit-identical.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn

from odometry.encoders import FeatureMap, QuerySet
from odometry.geom import CameraModel, camera_project
from odometry.layers import CrossAttention, basic_init, zero_init


# === Domain Types ===
@dataclass(frozen=True)
class SamplePlan:
    offsets: torch.Tensor                                   # (N, N_c, M, 2) feature-map cells, (dx, dy)
    weights: torch.Tensor                                   # (N, N_c, M) softmax-normalized over N_c * M


@dataclass(frozen=True)
class FusionMask:
    fusable: torch.Tensor                                   # (N,) bool


@dataclass(frozen=True)
class FusedQuerySet(QuerySet):
    fusable: torch.Tensor                                   # (N,) bool, the mask that gated this level


class SparseQueryFusion(nn.Module):
    """Learned parameters of one pyramid level's fusion; the fusion steps below are functions of this module."""

    def __init__(
        self,
        channels: int,
        num_cameras: int = 1,
        samples_per_query: int = 4,
        heads: int = 4,
        enable_global: bool = True,
        enabled: bool = True,
    ) -> None:
        super().__init__()
        self.channels, self.num_cameras, self.samples_per_query = channels, num_cameras, samples_per_query
        self.enable_global, self.enabled = enable_global, enabled

        self.offset_head = nn.Linear(channels, num_cameras * samples_per_query * 2)
        self.weight_head = nn.Linear(channels, num_cameras * samples_per_query)
        self.query_pos = nn.Linear(3, channels)
        self.attention = CrossAttention(channels, heads)
        self.global_proj = nn.Linear(channels, channels)
        self.global_gate = nn.Linear(channels, channels)

        self.apply(basic_init)
        zero_init(self.offset_head)
        zero_init(self.weight_head)

    def forward(
        self, queries: QuerySet, maps: Sequence[FeatureMap], cams: Sequence[CameraModel]
    ) -> FusedQuerySet:
        return fuse_level(queries, maps, cams, self)


# === Fusion Steps ===
def plan_samples(queries: QuerySet, fusion: SparseQueryFusion) -> SamplePlan:
    n, n_c, m = len(queries), fusion.num_cameras, fusion.samples_per_query
    offsets = fusion.offset_head(queries.features).reshape(n, n_c, m, 2)
    weights = fusion.weight_head(queries.features).softmax(dim=-1).reshape(n, n_c, m)
    return SamplePlan(offsets, weights)


def bilinear_sample(data: torch.Tensor, location: torch.Tensor) -> torch.Tensor:
    """
    Four-neighbour bilinear interpolation with zero padding.

    :param data: (H, W, C) feature map
    :param location: (..., 2) continuous (x, y) = (column, row) in cell units
    :return: (..., C); neighbours outside the map contribute zero
    """
    height, width = data.shape[0], data.shape[1]

    # Far-away locations only ever touch padding, so bound them before the integer cast
    x = location[..., 0].clamp(-2.0, width + 1.0)
    y = location[..., 1].clamp(-2.0, height + 1.0)
    x0, y0 = torch.floor(x), torch.floor(y)
    fx, fy = x - x0, y - y0
    x0, y0 = x0.long(), y0.long()

    out = torch.zeros(*location.shape[:-1], data.shape[-1], dtype=data.dtype)
    for dy, dx, weight in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)), (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        xi, yi = x0 + dx, y0 + dy
        inside = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
        value = data[yi.clamp(0, height - 1), xi.clamp(0, width - 1)]
        out = out + value * torch.where(inside, weight, torch.zeros_like(weight))[..., None]
    return out


def project_to_level(queries: QuerySet, fmap: FeatureMap, cam: CameraModel) -> torch.Tensor:
    """Reference location (N, 2) of each query on a level's feature map: projected pixel / stride."""
    px, py, _, _ = camera_project(queries.positions, cam)
    return torch.stack((px, py), dim=-1) / fmap.stride


def sample_tokens(
    queries: QuerySet, maps: Sequence[FeatureMap], cams: Sequence[CameraModel], plan: SamplePlan
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Returns (F_sample (N, C), per-sample tokens (N, N_c * M, C)); the weighted sum runs in ascending (k, j)."""
    assert len(maps) == len(cams) == plan.offsets.shape[1], "One feature map and one plan slot per camera!"
    tokens, sampled = [], None
    for k, (fmap, cam) in enumerate(zip(maps, cams)):
        location = project_to_level(queries, fmap, cam)[:, None, :] + plan.offsets[:, k]
        values = bilinear_sample(fmap.data, location)                                       # (N, M, C)
        tokens.append(values)
        for j in range(values.shape[1]):
            term = values[:, j] * plan.weights[:, k, j, None]
            sampled = term if sampled is None else sampled + term
    return sampled, torch.cat(tokens, dim=1)


def sample_fuse(
    queries: QuerySet, maps: Sequence[FeatureMap], cams: Sequence[CameraModel], plan: SamplePlan
) -> torch.Tensor:
    return sample_tokens(queries, maps, cams, plan)[0]


def fusion_tokens(
    queries: QuerySet, maps: Sequence[FeatureMap], cams: Sequence[CameraModel], plan: SamplePlan
) -> torch.Tensor:
    """Key/value set (N, 1 + N_c * M, C): token 0 is F_sample, then the per-sample features in (k, j) order."""
    sampled, tokens = sample_tokens(queries, maps, cams, plan)
    return torch.cat((sampled[:, None], tokens), dim=1)


def cross_attend(
    query_feats: torch.Tensor,
    sampled_tokens: torch.Tensor,
    attention: CrossAttention,
    query_pos: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    Each query attends over its own token set, with a residual onto the LiDAR feature.

    :param query_feats: (N, D) LiDAR features F_P
    :param sampled_tokens: (N, T, D) or (N, D) (a single token per query)
    :param query_pos: [Optional] (N, D) positional embedding added to the attention query only
    """
    if sampled_tokens.dim() == 2:
        sampled_tokens = sampled_tokens[:, None, :]
    query = query_feats if query_pos is None else query_feats + query_pos
    return query_feats + attention(query[:, None, :], sampled_tokens)[:, 0]


def compute_fusion_mask(queries: QuerySet, cams: Sequence[CameraModel]) -> FusionMask:
    fusable = torch.zeros(len(queries), dtype=torch.bool)
    for cam in cams:
        fusable |= camera_project(queries.positions, cam)[3]
    return FusionMask(fusable & queries.valid)


def global_adaptive_fuse(fused: torch.Tensor, maps: Sequence[FeatureMap], fusion: SparseQueryFusion) -> torch.Tensor:
    """out_i = f_i + sigmoid(W_g f_i + b_g) * proj(pool(map)); pooling averages all cells of all cameras' maps."""
    pooled = torch.stack([fmap.data.mean(dim=(0, 1)) for fmap in maps]).mean(dim=0)
    return fused + torch.sigmoid(fusion.global_gate(fused)) * fusion.global_proj(pooled)[None]


def fuse_level(
    queries: QuerySet, maps: Sequence[FeatureMap], cams: Sequence[CameraModel], fusion: SparseQueryFusion
) -> FusedQuerySet:
    mask = compute_fusion_mask(queries, cams).fusable
    if not fusion.enabled:
        mask = torch.zeros_like(mask)
    if not mask.any():
        return FusedQuerySet(**vars(queries), fusable=mask)

    tokens = fusion_tokens(queries, maps, cams, plan_samples(queries, fusion))
    attended = cross_attend(queries.features, tokens, fusion.attention, fusion.query_pos(queries.positions))
    if fusion.enable_global:
        attended = global_adaptive_fuse(attended, maps, fusion)

    features = torch.where(mask[:, None], attended, queries.features)
    return FusedQuerySet(
        level=queries.level,
        positions=queries.positions,
        features=features,
        pixel_anchors=queries.pixel_anchors,
        valid=queries.valid,
        fusable=mask,
    )
