"""
verify.py

`dvlo4d verify <suite>`: self-contained invariant suites over the library, each a list of named checks with a pass/fail
status and a short measurement. Every suite is seeded and runs in seconds on a CPU.

Suites:
    - geometry   : compose vs. 4x4 matrix products, quaternion <-> matrix round trips, inverses
    - fusion     : pass-through of non-fusable queries, the fusion ablation, mask & validity, bilinear sampling
    - gradcheck  : autograd vs. central finite differences for every learned building block and the pose loss,
                   plus the closed-form gradients of the loss scales
    - loss       : closed-form loss values, CAL permutation invariance, clip tiling
    - temporal   : memory-bank FIFO window, residual-identity temporal module (bitwise equal to the cascade alone)
    - metrics    : zero errors on identical trajectories, scaled straight-line fixture, length mismatch
    - perturb    : half-rate frame count, Gaussian noise statistics
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Tuple

import numpy as np
import torch
from rich.table import Table

from cli.common import console
from conf import ModelConfig, ModelRegistry
from dataio.kitti import Frame, ImageRaster, PointCloud, SequenceBundle
from dataio.synth import SceneConfig, generate_sequence
from evaluation import NoSegmentsError, PerturbationError, Trajectory, evaluate, kitti_rel_errors, perturb
from odometry.dvlo import DVLO4D, estimate_motions
from odometry.encoders import FeatureMap, ImageEncoder, PointEncoder, PseudoImage, QuerySet
from odometry.fusion import SparseQueryFusion, bilinear_sample, fuse_level, plan_samples
from odometry.geom import (
    CameraModel,
    CylindricalParams,
    RigidMotion,
    compose_residual,
    matrix_to_quat,
    quat_normalize,
    quat_to_matrix,
    rotation_angle,
    rotation_distance,
)
from odometry.layers import CrossAttention
from odometry.pose import AttentiveCostVolume, CostVolume, PoseEstimate, PoseHead, attentive_cost_volume
from odometry.temporal import (
    SENTINEL_TAG,
    SequenceState,
    TemporalEncoder,
    TemporalInteraction,
    ego_refine,
    predict_initial_pose,
    step_sequence_state,
    temporal_encode,
    update_refine,
)
from overwatch import initialize_overwatch
from training.clips import make_clips
from training.gradcheck import grad_check
from training.losses import LossBreakdown, collective_average_loss, pose_loss, weighted_total
from util import set_global_seed

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

GEOMETRY_TOLERANCE = 1e-9
LOSS_TOLERANCE = 1e-12
GRADCHECK_TOLERANCE = 1e-4
CLOSED_FORM_TOLERANCE = 1e-7
NOISE_STD_TOLERANCE = 0.05

# Registry =>> Maps gradcheck case name --> tolerance, where tighter than `GRADCHECK_TOLERANCE`
GRADCHECK_TOLERANCES: Dict[str, float] = {"linear": 1e-7}

GradCheckCase = Tuple[Callable[[], torch.Tensor], Mapping[str, torch.Tensor]]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerifyConfig:
    # fmt: off
    suite: str = "all"                                      # Suite to run (see `SUITES`) or "all"
    seed: int = 7                                           # Seed of every random fixture
    # fmt: on


# === Fixtures ===
def random_motions(generator: torch.Generator, count: int, scale: float = 10.0) -> RigidMotion:
    rotation = quat_normalize(torch.randn(count, 4, generator=generator, dtype=torch.float64))
    return RigidMotion(rotation, scale * torch.randn(count, 3, generator=generator, dtype=torch.float64))


def random_motion(generator: torch.Generator, scale: float = 1.0) -> RigidMotion:
    batched = random_motions(generator, 1, scale)
    return RigidMotion(batched.rotation[0], batched.translation[0])


def pinhole_camera(width: int = 32, height: int = 16, focal: float = 16.0) -> CameraModel:
    """A camera looking down the LiDAR z axis (identity extrinsic)."""
    intrinsics = torch.tensor([[focal, 0.0, width / 2], [0.0, focal, height / 2], [0.0, 0.0, 1.0]], dtype=torch.float64)
    return CameraModel(intrinsics, RigidMotion.identity(), width=width, height=height)


def random_queries(
    generator: torch.Generator, count: int, channels: int, in_view: bool = True, level: int = 0
) -> QuerySet:
    """Queries 2-6 m in front of (or behind) `pinhole_camera`, inside its field of view."""
    depth = 2.0 + 4.0 * torch.rand(count, generator=generator, dtype=torch.float64)
    lateral = 0.4 * (2.0 * torch.rand(count, 2, generator=generator, dtype=torch.float64) - 1.0) * depth[:, None]
    positions = torch.cat((lateral, (depth if in_view else -depth)[:, None]), dim=-1)
    return QuerySet(
        level=level,
        positions=positions,
        features=torch.randn(count, channels, generator=generator, dtype=torch.float64),
        pixel_anchors=torch.zeros(count, 2, dtype=torch.long),
        valid=torch.ones(count, dtype=torch.bool),
    )


def random_feature_map(generator: torch.Generator, channels: int, height: int = 8, width: int = 16) -> FeatureMap:
    return FeatureMap(0, torch.randn(height, width, channels, generator=generator, dtype=torch.float64), stride=2)


def random_pseudo_image(generator: torch.Generator, height: int = 6, width: int = 8) -> PseudoImage:
    occupancy = torch.rand(height, width, generator=generator) < 0.6
    points = 5.0 * torch.randn(height, width, 3, generator=generator, dtype=torch.float64) * occupancy[..., None]
    params = CylindricalParams(delta_theta=2 * math.pi / width, delta_phi=math.radians(2.0), height=height, width=width)
    return PseudoImage(occupancy, points, params)


def straight_line(frames: int, scale: float = 1.0) -> Trajectory:
    """Poses along +x at `scale` meters per frame."""
    translation = torch.zeros(frames, 3, dtype=torch.float64)
    translation[:, 0] = scale * torch.arange(frames, dtype=torch.float64)
    rotation = torch.zeros(frames, 4, dtype=torch.float64)
    rotation[:, 0] = 1.0
    return Trajectory(RigidMotion(rotation, translation))


def toy_model(seed: int, **temporal_overrides: bool) -> DVLO4D:
    cfg = ModelConfig.get_choice_class(ModelRegistry.DVLO4D_TOY.model_id)()
    if temporal_overrides:
        cfg = dataclasses.replace(cfg, temporal=dataclasses.replace(cfg.temporal, **temporal_overrides))
    set_global_seed(seed)
    return DVLO4D(cfg)


# === Suites ===
def geometry_suite(seed: int) -> List[CheckResult]:
    generator = torch.Generator().manual_seed(seed)
    delta, prior = random_motions(generator, 1000), random_motions(generator, 1000)

    composed = compose_residual(delta, prior).to_matrix()
    compose_err = (composed - delta.to_matrix() @ prior.to_matrix()).abs().max().item()
    round_trip_err = rotation_distance(matrix_to_quat(quat_to_matrix(delta.rotation)), delta.rotation).max().item()
    matrix_err = (RigidMotion.from_matrix(delta.to_matrix()).to_matrix() - delta.to_matrix()).abs().max().item()
    loop = delta.compose(delta.inverse())
    inverse_err = max(loop.translation.abs().max().item(), rotation_angle(loop.rotation).max().item())

    checks = [
        ("compose_residual == matrix product (1000 draws)", compose_err),
        ("quaternion -> matrix -> quaternion", round_trip_err),
        ("matrix -> motion -> matrix", matrix_err),
        ("motion . inverse == identity", inverse_err),
    ]
    return [CheckResult("geometry", name, err < GEOMETRY_TOLERANCE, f"max err = {err:.2e}") for name, err in checks]


def fusion_suite(seed: int, channels: int = 16) -> List[CheckResult]:
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    fusion = SparseQueryFusion(channels, heads=4).to(torch.float64)
    disabled = SparseQueryFusion(channels, heads=4, enabled=False).to(torch.float64)
    cam, fmap = pinhole_camera(), random_feature_map(generator, channels)

    behind = random_queries(generator, 12, channels, in_view=False)
    fused_behind = fuse_level(behind, [fmap], [cam], fusion)

    in_view = random_queries(generator, 12, channels)
    fused_disabled = fuse_level(in_view, [fmap], [cam], disabled)

    half_valid = dataclasses.replace(in_view, valid=torch.arange(12) < 6)
    fused_half = fuse_level(half_valid, [fmap], [cam], fusion)
    mask_ok = torch.equal(fused_half.fusable, half_valid.valid)
    untouched = torch.equal(fused_half.features[6:], half_valid.features[6:])

    plan = plan_samples(in_view, fusion)
    uniform = torch.allclose(plan.weights, torch.full_like(plan.weights, 1.0 / fusion.samples_per_query))
    at_cell = bilinear_sample(fmap.data, torch.tensor([[5.0, 3.0]], dtype=torch.float64))[0]
    outside = bilinear_sample(fmap.data, torch.tensor([[-50.0, 400.0]], dtype=torch.float64))[0]

    return [
        CheckResult(
            "fusion",
            "queries behind the camera pass through",
            torch.equal(fused_behind.features, behind.features) and not fused_behind.fusable.any().item(),
            f"fusable = {int(fused_behind.fusable.sum())} / 12",
        ),
        CheckResult(
            "fusion",
            "fusion ablation passes every query through",
            torch.equal(fused_disabled.features, in_view.features),
            f"fusable = {int(fused_disabled.fusable.sum())} / 12",
        ),
        CheckResult(
            "fusion",
            "mask == in view AND valid; invalid rows untouched",
            mask_ok and untouched,
            f"fusable = {int(fused_half.fusable.sum())} / 12",
        ),
        CheckResult(
            "fusion",
            "zero-initialized offsets & uniform weights",
            not plan.offsets.any().item() and uniform,
            f"max |offset| = {plan.offsets.abs().max().item():.1e}",
        ),
        CheckResult("fusion", "bilinear sample at a cell == cell value", torch.equal(at_cell, fmap.data[3, 5])),
        CheckResult("fusion", "bilinear sample far outside == 0", not outside.any().item()),
    ]


def gradcheck_cases(seed: int, channels: int = 16) -> Dict[str, GradCheckCase]:
    """Name -> (op, named float64 leaves) for every learned building block and the pose loss."""
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    cases: Dict[str, GradCheckCase] = {}

    linear = torch.nn.Linear(channels, channels).to(torch.float64)
    inputs = torch.randn(4, channels, generator=generator, dtype=torch.float64)
    cases["linear"] = (lambda: linear(inputs), dict(linear.named_parameters()))

    point_encoder = PointEncoder(channels, (2, 4)).to(torch.float64)
    pseudo_image = random_pseudo_image(generator)
    cases["point-encoder"] = (
        lambda: torch.cat([qs.features.reshape(-1) for qs in point_encoder(pseudo_image)]),
        dict(point_encoder.named_parameters()),
    )

    attention = CrossAttention(channels, 4).to(torch.float64)
    query = torch.randn(1, 3, channels, generator=generator, dtype=torch.float64)
    tokens = torch.randn(1, 5, channels, generator=generator, dtype=torch.float64)
    cases["cross-attention"] = (lambda: attention(query, tokens), dict(attention.named_parameters()))

    cost_volume = AttentiveCostVolume(channels, knn=4).to(torch.float64)
    src, tgt = random_queries(generator, 10, channels), random_queries(generator, 12, channels)
    tgt = dataclasses.replace(tgt, valid=torch.arange(12) < 9)
    cases["cost-volume"] = (
        lambda: attentive_cost_volume(src, tgt, cost_volume).embeddings,
        dict(cost_volume.named_parameters()),
    )

    head = PoseHead(channels).to(torch.float64)
    cv = CostVolume(0, torch.randn(10, channels, generator=generator, dtype=torch.float64), torch.arange(10) < 7)
    cases["pose-head"] = (lambda: torch.cat(head(cv)), dict(head.named_parameters()))

    fusion = SparseQueryFusion(channels, heads=4).to(torch.float64)
    cam, fmap = pinhole_camera(), random_feature_map(generator, channels)
    queries = random_queries(generator, 8, channels)
    cases["sparse-query-fusion"] = (
        lambda: fuse_level(queries, [fmap], [cam], fusion).features,
        dict(fusion.named_parameters()),
    )

    image_encoder = ImageEncoder(3, 8, levels=2).to(torch.float64)
    image = torch.rand(3, 16, 16, generator=generator, dtype=torch.float64)
    cases["image-encoder"] = (
        lambda: torch.cat([fm.data.reshape(-1) for fm in image_encoder(image)]),
        dict(image_encoder.named_parameters()),
    )

    encoder = TemporalEncoder(4, channels, heads=4).to(torch.float64)
    history = torch.randn(5, 4, generator=generator, dtype=torch.float64)
    cases["temporal-encoder"] = (lambda: encoder(history), dict(encoder.named_parameters()))

    temporal = TemporalInteraction(channels, channels, heads=4).to(torch.float64)
    state = SequenceState.fresh(channels, t_h=4)
    for _ in range(3):
        ego = torch.randn(channels, generator=generator, dtype=torch.float64)
        step_sequence_state(state, ego, random_motion(generator))
    ego, last = torch.randn(channels, generator=generator, dtype=torch.float64), random_motion(generator)

    def temporal_op() -> torch.Tensor:
        enc = temporal_encode(state.mpb, temporal)
        initial = predict_initial_pose(ego_refine(ego, state.mfb, temporal), enc, temporal, level=1)
        refined = update_refine(PoseEstimate(last, level=0), enc, temporal)
        return torch.cat([torch.cat((e.motion.rotation, e.motion.translation)) for e in (initial, refined)])

    cases["temporal-interaction"] = (temporal_op, dict(temporal.named_parameters()))

    gt = random_motion(generator)
    leaves = {
        "q": torch.randn(4, generator=generator, dtype=torch.float64).requires_grad_(True),
        "t": torch.randn(3, generator=generator, dtype=torch.float64).requires_grad_(True),
        "k_t": torch.tensor(0.3, dtype=torch.float64, requires_grad=True),
        "k_q": torch.tensor(-2.5, dtype=torch.float64, requires_grad=True),
    }
    cases["pose-loss"] = (
        lambda: pose_loss(RigidMotion(quat_normalize(leaves["q"]), leaves["t"]), gt, leaves["k_t"], leaves["k_q"]),
        leaves,
    )
    return cases


def loss_scale_gradients(k_t: float = 0.3, k_q: float = -2.5, seed: int = 0) -> Tuple[float, float]:
    """(k_t, k_q) gaps between autograd and the closed forms 1 - ‖Δt‖₁·exp(-k_t) and 1 - ‖Δq‖·exp(-k_q)."""
    generator = torch.Generator().manual_seed(seed)
    pred, gt = random_motion(generator), random_motion(generator)
    scales = torch.tensor([k_t, k_q], dtype=torch.float64, requires_grad=True)
    (grad,) = torch.autograd.grad(pose_loss(pred, gt, scales[0], scales[1]), scales)
    translation_error = (gt.translation - pred.translation).abs().sum().item()
    rotation_error = rotation_distance(gt.rotation, pred.rotation).item()
    return (
        abs(grad[0].item() - (1.0 - translation_error * math.exp(-k_t))),
        abs(grad[1].item() - (1.0 - rotation_error * math.exp(-k_q))),
    )


def gradcheck_suite(seed: int) -> List[CheckResult]:
    results = []
    for name, (op, params) in gradcheck_cases(seed).items():
        tolerance = GRADCHECK_TOLERANCES.get(name, GRADCHECK_TOLERANCE)
        report = grad_check(op, params, tolerance=tolerance, seed=seed, raise_on_failure=False)
        detail = f"max rel err = {report.max_rel_error:.2e} (tolerance {tolerance:.0e})"
        if not report.passed:
            detail += f" (failing: {', '.join(report.failures)})"
        results.append(CheckResult("gradcheck", name, report.passed, detail))

    gap = max(loss_scale_gradients(seed=seed))
    results.append(
        CheckResult("gradcheck", "pose-loss k_t / k_q closed form", gap < CLOSED_FORM_TOLERANCE, f"gap = {gap:.2e}")
    )
    return results


def loss_suite(seed: int, alpha: Tuple[float, ...] = (1.6, 0.8, 0.4, 0.8), beta: float = 0.8) -> List[CheckResult]:
    generator = torch.Generator().manual_seed(seed)
    k_t, k_q = torch.tensor(0.0, dtype=torch.float64), torch.tensor(-2.5, dtype=torch.float64)
    motion = random_motion(generator)

    exact = pose_loss(motion, motion, k_t, k_q).item()
    exact_t = torch.tensor(exact, dtype=torch.float64)
    total = weighted_total([exact_t] * len(alpha), exact_t, alpha, beta)
    expected_total = exact * (sum(alpha) + beta)
    flipped = RigidMotion(-motion.rotation, motion.translation)
    sign_gap = abs(pose_loss(flipped, motion, k_t, k_q).item() - exact)

    frames = []
    for _ in range(5):
        layers = tuple(torch.rand(len(alpha), generator=generator, dtype=torch.float64).unbind())
        refined = torch.rand((), generator=generator, dtype=torch.float64)
        total_t = weighted_total(layers, refined, alpha, beta)
        frames.append(LossBreakdown(layers, refined, alpha, beta, k_t, k_q, total_t))
    order = torch.randperm(len(frames), generator=generator).tolist()
    cal_gap = abs(
        collective_average_loss(frames, alpha, beta).item()
        - collective_average_loss([frames[idx] for idx in order], alpha, beta).item()
    )

    schedule = make_clips({"00": 120}, t_c=60, t_s=3)
    clip_counts = [len(clip.sub_clips) for clip in schedule.clips]
    crossing = 0
    for pairs in range(1, 201):
        for clip in make_clips({"00": pairs}, t_c=60, t_s=3).clips:
            crossing += sum(
                sub.start < clip.start or sub.start + sub.length > clip.start + clip.length for sub in clip.sub_clips
            )

    return [
        CheckResult("loss", "zero error at (k_t, k_q) = (0, -2.5) gives -2.5", abs(exact + 2.5) < LOSS_TOLERANCE,
                    f"loss = {exact:.12f}"),
        CheckResult("loss", "weighted total == loss * (sum(alpha) + beta)",
                    abs(total.item() - expected_total) < LOSS_TOLERANCE, f"total = {total.item():.12f}"),
        CheckResult("loss", "rotation loss invariant to quaternion sign", sign_gap < LOSS_TOLERANCE,
                    f"gap = {sign_gap:.1e}"),
        CheckResult("loss", "CAL invariant to frame order", cal_gap < LOSS_TOLERANCE, f"gap = {cal_gap:.1e}"),
        CheckResult("loss", "120 pairs, T_C = 60, T_s = 3 -> 2 clips x 20 sub-clips", clip_counts == [20, 20],
                    f"sub-clips per clip = {clip_counts}"),
        CheckResult("loss", "no sub-clip crosses a clip boundary (1..200 pairs)", crossing == 0,
                    f"crossings = {crossing}"),
    ]


def temporal_suite(seed: int, t_h: int = 30, steps: int = 35) -> List[CheckResult]:
    generator = torch.Generator().manual_seed(seed)
    state = SequenceState.fresh(ego_dim=8, t_h=t_h)
    fresh_tags = state.mfb.tags
    fresh_ok = fresh_tags == [SENTINEL_TAG] and not state.mpb.newest().any().item()
    for _ in range(steps):
        step_sequence_state(state, torch.randn(8, generator=generator, dtype=torch.float64), random_motion(generator))
    window_ok = len(state.mfb) == len(state.mpb) == t_h and state.mpb.tags == list(range(steps - t_h, steps))

    # An untrained temporal module must leave the trajectory bit-identical to the cascade alone
    bundle = generate_sequence(SceneConfig(frames=4, boxes=12), seed)
    with_temporal = toy_model(seed)
    cascade_only = toy_model(seed, enabled=False)
    cascade_only.load_state_dict(with_temporal.state_dict())
    a = estimate_motions(with_temporal, bundle.frames, bundle.cameras)
    b = estimate_motions(cascade_only, bundle.frames, bundle.cameras)
    identical = len(a) == len(b) and all(
        torch.equal(x.rotation, y.rotation) and torch.equal(x.translation, y.translation) for x, y in zip(a, b)
    )

    return [
        CheckResult("temporal", "fresh banks hold one zero sentinel", fresh_ok, f"tags = {fresh_tags}"),
        CheckResult("temporal", f"{steps} pushes keep the newest {t_h} entries", window_ok, f"size = {len(state.mfb)}"),
        CheckResult("temporal", "untrained temporal module == cascade-only (bitwise)", identical,
                    f"{len(a)} relative motions"),
    ]


def metrics_suite(seed: int) -> List[CheckResult]:
    generator = torch.Generator().manual_seed(seed)
    rel = [random_motion(generator) for _ in range(150)]
    poses = [RigidMotion.identity()]
    for motion in rel:
        poses.append(poses[-1].compose(motion))
    trajectory = Trajectory.from_poses(poses)
    zero = evaluate(trajectory, trajectory)
    zero_max = max(abs(v) for v in (zero.t_rel or 0.0, zero.r_rel or 0.0, zero.ate, zero.rpe))

    t_rel, r_rel = kitti_rel_errors(straight_line(201, scale=1.01), straight_line(201))

    try:
        evaluate(straight_line(10), straight_line(12))
        mismatch_ok = False
    except ValueError as err:
        mismatch_ok = "10" in str(err) and "12" in str(err)

    try:
        kitti_rel_errors(straight_line(20), straight_line(20))
        short_ok = False
    except NoSegmentsError:
        short_ok = True

    return [
        CheckResult("metrics", "identical trajectories -> zero errors", zero_max < GEOMETRY_TOLERANCE,
                    f"max = {zero_max:.1e}"),
        CheckResult("metrics", "1.01-scaled straight line -> t_rel 1.000 %", abs(t_rel - 1.0) < 1e-6 and r_rel == 0.0,
                    f"t_rel = {t_rel:.9f} %"),
        CheckResult("metrics", "length mismatch names both counts", mismatch_ok),
        CheckResult("metrics", "too-short trajectory has no segments", short_ok),
    ]


def perturb_suite(seed: int, sigma: float = 0.05, points: int = 12000) -> List[CheckResult]:
    bundle = generate_sequence(SceneConfig(frames=10, boxes=12), seed)
    halved = perturb(bundle, "half-rate")
    half_ok = len(halved.frames) == 5 and len(halved.gt_poses) == 5

    cloud = PointCloud(points=np.zeros((points, 3)), intensity=np.zeros(points))
    raster = ImageRaster(np.zeros((4, 4, 1)))
    flat = SequenceBundle(frames=(Frame(cloud, raster, 0.0),), cameras=bundle.cameras, sequence_id="noise")
    noisy = perturb(flat, f"gauss:{sigma}", seed=seed).frames[0].cloud.points
    stds = noisy.std(axis=0)
    std_ok = bool(np.all(np.abs(stds - sigma) <= NOISE_STD_TOLERANCE * sigma))

    try:
        perturb(bundle, "quarter-rate")
        unknown_ok = False
    except PerturbationError:
        unknown_ok = True

    return [
        CheckResult("perturb", "half-rate keeps every other frame (10 -> 5)", half_ok, f"frames = {len(halved.frames)}"),
        CheckResult("perturb", f"gauss:{sigma} per-axis std within 5 %", std_ok,
                    "std = " + ", ".join(f"{s:.5f}" for s in stds)),
        CheckResult("perturb", "gauss:0 returns the input unchanged", perturb(bundle, "gauss:0") is bundle),
        CheckResult("perturb", "unknown perturbation is rejected", unknown_ok),
    ]


# Registry =>> Maps suite name --> suite function
SUITES: Dict[str, Callable[[int], List[CheckResult]]] = {
    "geometry": geometry_suite,
    "fusion": fusion_suite,
    "gradcheck": gradcheck_suite,
    "loss": loss_suite,
    "temporal": temporal_suite,
    "metrics": metrics_suite,
    "perturb": perturb_suite,
}


def run_suites(suite: str, seed: int) -> List[CheckResult]:
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"Suite `{suite}` is not supported; choose one of {', '.join([*SUITES, 'all'])}")
    names = list(SUITES) if suite == "all" else [suite]

    results = []
    for name in names:
        overwatch.info(f"Running suite `{name}`")
        results.extend(SUITES[name](seed))
    return results


def verify(cfg: VerifyConfig) -> int:
    results = run_suites(cfg.suite, cfg.seed)

    table = Table(title=f"verify {cfg.suite}")
    for column in ("suite", "check", "status", "detail"):
        table.add_column(column)
    for result in results:
        status = "[green]PASS[/]" if result.passed else "[bold red]FAIL[/]"
        table.add_row(result.suite, result.name, status, result.detail)
    console.print(table)

    failed = [result for result in results if not result.passed]
    if failed:
        overwatch.error(f"{len(failed)} / {len(results)} checks failed")
        return 1
    overwatch.info(f"All {len(results)} checks passed")
    return 0
