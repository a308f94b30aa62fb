"""
encoders.py

Modality-specific encoders at desk scale:
    - `build_pseudo_image`: cylindrical reorganization of a LiDAR scan; every occupied cell keeps its nearest point
    - `PointEncoder`: per-cell lift of (x, y, z, range), then per level a linear map + 3x3 stride-2 max-pool over the
      occupied grid; each level is subsampled to a fixed number of queries by farthest-point selection
    - `ImageEncoder`: 3x3 stride-2 convolutions with top-down lateral addition (feature pyramid)

Levels are indexed l = 0 (finest, stride 2) ... L-1 (coarsest).
"""

import math
from dataclasses import dataclass
from functools import partial
from typing import List, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from dataio.kitti import ImageRaster, PointCloud
from odometry.geom import CylindricalParams, cylindrical_project
from odometry.layers import basic_init
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


class EncoderConfigError(ValueError):
    pass


# === Domain Types ===
@dataclass(frozen=True)
class PseudoImage:
    occupancy: torch.Tensor                                 # (H_P, W_P) bool
    points: torch.Tensor                                    # (H_P, W_P, 3) retained original points (zeros if empty)
    params: CylindricalParams


@dataclass(frozen=True)
class QuerySet:
    level: int
    positions: torch.Tensor                                 # (N_l, 3) meters, anchor points of the selected cells
    features: torch.Tensor                                  # (N_l, D)
    pixel_anchors: torch.Tensor                             # (N_l, 2) (row, col) of the anchor in the pseudo-image
    valid: torch.Tensor                                     # (N_l,) bool, False for padding repeats

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class FeatureMap:
    level: int
    data: torch.Tensor                                      # (H, W, C)
    stride: int                                             # original-image pixels per cell

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


# === Pseudo-Image ===
def bin_points(points: torch.Tensor, params: CylindricalParams) -> torch.Tensor:
    """Integer (row, col) bins of (N, 3) nonzero points; columns wrap when the grid spans a full sweep."""
    u, v = cylindrical_project(points, params)
    col = torch.floor(u).long() + params.width // 2
    row = torch.floor(v - params.phi_center / params.delta_phi).long() + params.height // 2
    if params.width * params.delta_theta >= 2 * math.pi - 1e-9:
        col = torch.remainder(col, params.width)
    return torch.stack((row, col), dim=-1)


def build_pseudo_image(cloud: PointCloud, params: CylindricalParams) -> PseudoImage:
    points = torch.from_numpy(np.ascontiguousarray(cloud.points, dtype=np.float64))
    occupancy = torch.zeros(params.height, params.width, dtype=torch.bool)
    grid = torch.zeros(params.height, params.width, 3, dtype=torch.float64)

    ranges = torch.linalg.vector_norm(points, dim=-1)
    points, ranges = points[ranges > 0], ranges[ranges > 0]
    if points.shape[0] == 0:
        return PseudoImage(occupancy, grid, params)

    rc = bin_points(points, params)
    inside = (rc[:, 0] >= 0) & (rc[:, 0] < params.height) & (rc[:, 1] >= 0) & (rc[:, 1] < params.width)
    if (outside := int((~inside).sum())) > 0:
        overwatch.debug(f"Pseudo-image dropped {outside} out-of-grid points")
    points, ranges, rc = points[inside], ranges[inside], rc[inside]

    # Nearest range wins each cell; ties resolve to the lower point index
    flat = (rc[:, 0] * params.width + rc[:, 1]).numpy()
    order = np.lexsort((np.arange(flat.shape[0]), ranges.numpy()))
    cells, first = np.unique(flat[order], return_index=True)
    keep = torch.from_numpy(order[first])

    occupancy.view(-1)[torch.from_numpy(cells)] = True
    grid.view(-1, 3)[torch.from_numpy(cells)] = points[keep]
    return PseudoImage(occupancy, grid, params)


# === Point Branch ===
def farthest_point_indices(positions: torch.Tensor, count: int) -> torch.Tensor:
    """Deterministic farthest-point selection over (M, 3) positions, seeded by index 0; returns min(count, M) indices."""
    total = positions.shape[0]
    selected = torch.empty(min(count, total), dtype=torch.long)
    if selected.numel() == 0:
        return selected

    dist = torch.full((total,), float("inf"), dtype=positions.dtype)
    current = 0
    for step in range(selected.numel()):
        selected[step] = current
        dist = torch.minimum(dist, ((positions - positions[current]) ** 2).sum(dim=-1))
        dist[selected[: step + 1]] = -1.0
        current = int(torch.argmax(dist))
    return selected


class PointEncoder(nn.Module):
    def __init__(self, channels: int, query_counts: Sequence[int], leaky_slope: float = 0.1) -> None:
        """
        :param channels: feature width D
        :param query_counts: queries per level, coarsest level first
        """
        super().__init__()
        self.channels, self.levels = channels, len(query_counts)
        self.query_counts = list(reversed(query_counts))
        self.act = partial(F.leaky_relu, negative_slope=leaky_slope)

        self.lift = nn.Linear(4, channels)
        self.aggregate = nn.ModuleList([nn.Linear(channels, channels) for _ in range(self.levels)])
        self.apply(basic_init)

    def forward(self, image: PseudoImage) -> List[QuerySet]:
        dtype = self.lift.weight.dtype
        occupied, points = image.occupancy, image.points.to(dtype)
        ranges = torch.linalg.vector_norm(points, dim=-1, keepdim=True)
        rows, cols = torch.meshgrid(
            torch.arange(occupied.shape[0], dtype=dtype), torch.arange(occupied.shape[1], dtype=dtype), indexing="ij"
        )
        pixels = torch.stack((rows, cols), dim=-1)

        x = self.act(self.lift(torch.cat((points, ranges), dim=-1))) * occupied[..., None]      # (H, W, D)
        score = torch.where(occupied, -ranges[..., 0], torch.full_like(ranges[..., 0], float("-inf")))

        query_sets = []
        for level, aggregate in enumerate(self.aggregate):
            h = self.act(aggregate(x)).masked_fill(~occupied[..., None], float("-inf"))
            pooled = F.max_pool2d(h.permute(2, 0, 1)[None], 3, stride=2, padding=1)[0].permute(1, 2, 0)
            score, index = F.max_pool2d(score[None, None], 3, stride=2, padding=1, return_indices=True)
            score, index = score[0, 0], index[0, 0]
            occupied = score > float("-inf")

            # Anchors follow the nearest-range child of each window
            points = points.reshape(-1, 3)[index.reshape(-1)].reshape(*index.shape, 3)
            pixels = pixels.reshape(-1, 2)[index.reshape(-1)].reshape(*index.shape, 2)
            x = torch.where(occupied[..., None], pooled, torch.zeros_like(pooled))

            query_sets.append(self.select_queries(level, x, points, pixels, occupied))

        return query_sets

    def select_queries(
        self, level: int, x: torch.Tensor, points: torch.Tensor, pixels: torch.Tensor, occupied: torch.Tensor
    ) -> QuerySet:
        count = self.query_counts[level]
        candidates = occupied.reshape(-1).nonzero().squeeze(1)
        with torch.no_grad():
            chosen = candidates[farthest_point_indices(points.reshape(-1, 3)[candidates], count)]

        valid = torch.zeros(count, dtype=torch.bool)
        valid[: chosen.numel()] = True
        if chosen.numel() == 0:
            overwatch.debug(f"Level {level} has no occupied cells; all {count} queries are padding")
            return QuerySet(
                level=level,
                positions=torch.zeros(count, 3, dtype=x.dtype),
                features=torch.zeros(count, x.shape[-1], dtype=x.dtype),
                pixel_anchors=torch.zeros(count, 2, dtype=x.dtype),
                valid=valid,
            )
        if chosen.numel() < count:
            overwatch.debug(f"Level {level} pads {count - chosen.numel()} queries by repeating the last anchor")
            chosen = torch.cat((chosen, chosen[-1:].expand(count - chosen.numel())))

        return QuerySet(
            level=level,
            positions=points.reshape(-1, 3)[chosen],
            features=x.reshape(-1, x.shape[-1])[chosen],
            pixel_anchors=pixels.reshape(-1, 2)[chosen],
            valid=valid,
        )


# === Image Branch ===
def raster_to_tensor(image: ImageRaster, channels: int, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """(H, W, C) raster -> (channels, H, W); grayscale is repeated, color is averaged when a single channel is asked."""
    data = torch.from_numpy(np.ascontiguousarray(image.data)).to(dtype).permute(2, 0, 1)
    if data.shape[0] == channels:
        return data
    if data.shape[0] == 1:
        return data.expand(channels, -1, -1).contiguous()
    if channels == 1:
        return data.mean(dim=0, keepdim=True)
    raise EncoderConfigError(f"Cannot map a {data.shape[0]}-channel raster onto {channels} channels")


class ImageEncoder(nn.Module):
    def __init__(self, in_channels: int, channels: int, levels: int, leaky_slope: float = 0.1) -> None:
        super().__init__()
        self.levels = levels
        self.act = partial(F.leaky_relu, negative_slope=leaky_slope)
        self.down = nn.ModuleList(
            [nn.Conv2d(in_channels if lvl == 0 else channels, channels, 3, stride=2, padding=1) for lvl in range(levels)]
        )
        self.lateral = nn.ModuleList([nn.Conv2d(channels, channels, 1) for _ in range(levels)])
        for conv in [*self.down, *self.lateral]:
            nn.init.constant_(conv.bias, 0)

    def forward(self, image: torch.Tensor) -> List[FeatureMap]:
        """:param image: (C_in, H, W) raster tensor"""
        min_side = 2 ** (self.levels + 1)
        if image.shape[-2] < min_side or image.shape[-1] < min_side:
            raise EncoderConfigError(
                f"Image {image.shape[-2]}x{image.shape[-1]} is smaller than {min_side} in some dimension "
                f"(needed for {self.levels} pyramid levels)"
            )

        bottom_up, x = [], image[None]
        for conv in self.down:
            x = self.act(conv(x))
            bottom_up.append(x)

        # Top-down pathway =>> nearest upsample of the coarser level added onto each lateral
        top_down = [None] * self.levels
        top_down[-1] = self.lateral[-1](bottom_up[-1])
        for lvl in reversed(range(self.levels - 1)):
            upsampled = F.interpolate(top_down[lvl + 1], size=bottom_up[lvl].shape[-2:], mode="nearest")
            top_down[lvl] = self.lateral[lvl](bottom_up[lvl]) + upsampled

        return [FeatureMap(lvl, fm[0].permute(1, 2, 0), stride=2 ** (lvl + 1)) for lvl, fm in enumerate(top_down)]


def point_feature_pyramid(image: PseudoImage, encoder: PointEncoder) -> List[QuerySet]:
    return encoder(image)


def image_feature_pyramid(image: ImageRaster, encoder: ImageEncoder) -> List[FeatureMap]:
    in_channels = encoder.down[0].in_channels
    return encoder(raster_to_tensor(image, in_channels, encoder.down[0].weight.dtype))
