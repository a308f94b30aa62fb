import dataclasses
import math

import pytest
import torch

from conftest import F64, feature_map, front_positions, make_queries, pinhole_camera
from odometry.fusion import (
    SamplePlan,
    SparseQueryFusion,
    bilinear_sample,
    compute_fusion_mask,
    cross_attend,
    fuse_level,
    fusion_tokens,
    global_adaptive_fuse,
    plan_samples,
    project_to_level,
    sample_fuse,
)
from odometry.encoders import FeatureMap
from odometry.geom import CameraModel, RigidMotion, camera_project
from odometry.layers import CrossAttention

CHANNELS = 16


def make_fusion(**kwargs) -> SparseQueryFusion:
    torch.manual_seed(0)
    return SparseQueryFusion(CHANNELS, heads=4, **kwargs).to(torch.float64)


def side_camera() -> CameraModel:
    front = pinhole_camera(focal=12.0)
    offset = RigidMotion(torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=F64), torch.tensor([0.3, -0.1, 0.0], dtype=F64))
    return CameraModel(front.intrinsics, offset, width=front.width, height=front.height)


def random_plan(generator: torch.Generator, count: int, num_cameras: int, samples: int) -> SamplePlan:
    offsets = 3.0 * (2.0 * torch.rand(count, num_cameras, samples, 2, generator=generator, dtype=F64) - 1.0)
    weights = torch.randn(count, num_cameras * samples, generator=generator, dtype=F64).softmax(dim=-1)
    return SamplePlan(offsets, weights.reshape(count, num_cameras, samples))


def explicit_bilinear(data: torch.Tensor, x: float, y: float) -> torch.Tensor:
    height, width = data.shape[0], data.shape[1]
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0
    value = torch.zeros(data.shape[-1], dtype=F64)
    corners = [
        (x0, y0, (1 - fx) * (1 - fy)),
        (x0 + 1, y0, fx * (1 - fy)),
        (x0, y0 + 1, (1 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ]
    for xi, yi, weight in corners:
        if 0 <= xi < width and 0 <= yi < height:
            value = value + weight * data[yi, xi]
    return value


def test_queries_behind_the_camera_pass_through(generator):
    queries = make_queries(front_positions(generator, 12, sign=-1.0), CHANNELS, generator)
    fused = fuse_level(queries, [feature_map(generator, CHANNELS)], [pinhole_camera()], make_fusion())
    assert not fused.fusable.any()
    assert torch.equal(fused.features, queries.features)


def test_disabled_fusion_passes_everything_through(generator):
    queries = make_queries(front_positions(generator, 12), CHANNELS, generator)
    fused = fuse_level(queries, [feature_map(generator, CHANNELS)], [pinhole_camera()], make_fusion(enabled=False))
    assert not fused.fusable.any()
    assert torch.equal(fused.features, queries.features)


def test_mask_combines_view_and_validity(generator):
    queries = make_queries(front_positions(generator, 12), CHANNELS, generator)
    queries = dataclasses.replace(queries, valid=torch.arange(12) < 6)
    fused = fuse_level(queries, [feature_map(generator, CHANNELS)], [pinhole_camera()], make_fusion())
    assert torch.equal(fused.fusable, queries.valid)
    assert torch.equal(fused.features[6:], queries.features[6:])
    assert not torch.equal(fused.features[:6], queries.features[:6])
    assert torch.equal(fused.positions, queries.positions)


def test_mask_is_a_union_over_cameras(generator):
    half_turn_about_y = RigidMotion(torch.tensor([0.0, 0.0, 1.0, 0.0], dtype=F64), torch.zeros(3, dtype=F64))
    front = pinhole_camera()
    back = CameraModel(front.intrinsics, half_turn_about_y, width=front.width, height=front.height)
    queries = make_queries(front_positions(generator, 8, sign=-1.0), CHANNELS, generator)
    assert not compute_fusion_mask(queries, [front]).fusable.any()
    assert compute_fusion_mask(queries, [front, back]).fusable.all()


def test_initial_sampling_plan(generator):
    fusion = make_fusion(samples_per_query=4)
    plan = plan_samples(make_queries(front_positions(generator, 5), CHANNELS, generator), fusion)
    assert plan.offsets.shape == (5, 1, 4, 2) and not plan.offsets.any()
    assert torch.allclose(plan.weights, torch.full((5, 1, 4), 0.25, dtype=torch.float64))


def test_bilinear_sample(generator):
    data = feature_map(generator, 3).data
    locations = torch.tensor([[5.0, 3.0], [5.5, 3.0], [15.5, 0.0], [-50.0, 400.0]], dtype=torch.float64)
    at_cell, midpoint, edge, outside = bilinear_sample(data, locations)
    assert torch.equal(at_cell, data[3, 5])
    assert torch.allclose(midpoint, 0.5 * (data[3, 5] + data[3, 6]))
    assert torch.allclose(edge, 0.5 * data[0, 15])
    assert not outside.any()


def test_sample_fuse_weights_samples_around_the_projection(generator):
    cam, fmap = pinhole_camera(), feature_map(generator, CHANNELS)
    queries = make_queries(front_positions(generator, 5), CHANNELS, generator)
    at_projection = bilinear_sample(fmap.data, project_to_level(queries, fmap, cam))

    uniform = plan_samples(queries, make_fusion(samples_per_query=4))
    assert torch.allclose(sample_fuse(queries, [fmap], [cam], uniform), at_projection)

    offsets = torch.zeros(5, 1, 2, 2, dtype=F64)
    offsets[:, 0, 1, 0] = 1.0
    weights = torch.zeros(5, 1, 2, dtype=F64)
    weights[:, 0, 1] = 1.0
    shifted = project_to_level(queries, fmap, cam) + torch.tensor([1.0, 0.0], dtype=F64)
    fused = sample_fuse(queries, [fmap], [cam], SamplePlan(offsets, weights))
    assert torch.allclose(fused, bilinear_sample(fmap.data, shifted))


def test_cross_attend_is_residual(generator):
    attention = CrossAttention(CHANNELS, 4).to(torch.float64)
    torch.nn.init.zeros_(attention.out_proj.weight)
    torch.nn.init.zeros_(attention.out_proj.bias)
    feats = torch.randn(6, CHANNELS, generator=generator, dtype=torch.float64)
    tokens = torch.randn(6, 5, CHANNELS, generator=generator, dtype=torch.float64)
    assert torch.equal(cross_attend(feats, tokens, attention), feats)
    assert cross_attend(feats, tokens[:, 0], attention).shape == (6, CHANNELS)


def test_global_fusion_adds_gated_pooled_feature(generator):
    fusion = make_fusion()
    fused = torch.randn(4, CHANNELS, generator=generator, dtype=torch.float64)
    fmap = feature_map(generator, CHANNELS)
    out = global_adaptive_fuse(fused, [fmap], fusion)
    gate = torch.sigmoid(fusion.global_gate(fused))
    assert torch.allclose(out, fused + gate * fusion.global_proj(fmap.data.mean(dim=(0, 1)))[None])

    torch.nn.init.zeros_(fusion.global_proj.weight)
    assert torch.equal(global_adaptive_fuse(fused, [fmap], fusion), fused)


# === Weighted Sampling Against Explicit Summation ===
@pytest.mark.parametrize("num_cameras", [1, 2])
@pytest.mark.parametrize("samples", [1, 2, 3, 4])
def test_sample_fuse_matches_explicit_summation(generator, num_cameras, samples):
    cams = [pinhole_camera(), side_camera()][:num_cameras]
    maps = [feature_map(generator, CHANNELS) for _ in cams]
    queries = make_queries(front_positions(generator, 8), CHANNELS, generator)
    plan = random_plan(generator, 8, num_cameras, samples)
    fused = sample_fuse(queries, maps, cams, plan)

    expected = torch.zeros_like(fused)
    for k, (fmap, cam) in enumerate(zip(maps, cams)):
        px, py, _, _ = camera_project(queries.positions, cam)
        for i in range(len(queries)):
            for j in range(samples):
                x = px[i].item() / fmap.stride + plan.offsets[i, k, j, 0].item()
                y = py[i].item() / fmap.stride + plan.offsets[i, k, j, 1].item()
                expected[i] += plan.weights[i, k, j].item() * explicit_bilinear(fmap.data, x, y)
    assert torch.allclose(fused, expected, rtol=0.0, atol=1e-6)


def test_sample_fuse_is_linear_in_the_maps(generator):
    cams = [pinhole_camera(), side_camera()]
    first = [feature_map(generator, CHANNELS) for _ in cams]
    second = [feature_map(generator, CHANNELS) for _ in cams]
    queries = make_queries(front_positions(generator, 6), CHANNELS, generator)
    plan = random_plan(generator, 6, 2, 4)

    def combine(a: float, b: float) -> list:
        return [FeatureMap(0, a * f.data + b * s.data, stride=f.stride) for f, s in zip(first, second)]

    combined = sample_fuse(queries, combine(2.5, -0.75), cams, plan)
    separate = 2.5 * sample_fuse(queries, first, cams, plan) - 0.75 * sample_fuse(queries, second, cams, plan)
    assert torch.allclose(combined, separate, rtol=0.0, atol=1e-6)


# === Key / Value Token Set ===
def test_fusion_tokens_lead_with_the_weighted_sample(generator):
    cams = [pinhole_camera(), side_camera()]
    maps = [feature_map(generator, CHANNELS) for _ in cams]
    queries = make_queries(front_positions(generator, 6), CHANNELS, generator)
    plan = random_plan(generator, 6, 2, 3)

    tokens = fusion_tokens(queries, maps, cams, plan)
    assert tokens.shape == (6, 1 + 2 * 3, CHANNELS)
    assert torch.equal(tokens[:, 0], sample_fuse(queries, maps, cams, plan))

    second_camera_last_sample = project_to_level(queries, maps[1], cams[1]) + plan.offsets[:, 1, 2]
    assert torch.allclose(tokens[:, -1], bilinear_sample(maps[1].data, second_camera_last_sample))


def test_sampling_weights_reach_the_fused_features(generator):
    fusion = make_fusion(num_cameras=2, samples_per_query=3, enable_global=False)
    torch.nn.init.normal_(fusion.offset_head.weight, std=0.5)
    torch.nn.init.normal_(fusion.weight_head.weight, std=0.5)
    cams = [pinhole_camera(), side_camera()]
    maps = [feature_map(generator, CHANNELS) for _ in cams]
    queries = make_queries(front_positions(generator, 6), CHANNELS, generator)
    before = fuse_level(queries, maps, cams, fusion).features

    with torch.no_grad():
        fusion.weight_head.bias.add_(torch.randn(fusion.weight_head.bias.shape, generator=generator, dtype=F64))
    assert not torch.allclose(fuse_level(queries, maps, cams, fusion).features, before)
