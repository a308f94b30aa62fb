"""
dvlo.py

Core model definition: a 4D visual-LiDAR odometry network composed of the point & image encoders, per-level sparse
query fusion, the temporal interaction & update module, and the coarse-to-fine pose cascade. The model consumes a
clip of frames pairwise (source = frame i+1, target = frame i) and maintains the temporal memory across pairs.
"""

import time
from collections import defaultdict
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from conf import ModelConfig
from dataio.kitti import Frame
from odometry.encoders import (
    FeatureMap,
    ImageEncoder,
    PointEncoder,
    QuerySet,
    build_pseudo_image,
    image_feature_pyramid,
    point_feature_pyramid,
)
from odometry.fusion import FusedQuerySet, SparseQueryFusion
from odometry.geom import CameraModel, CylindricalParams, RigidMotion
from odometry.pose import PoseCascade, PoseEstimate, run_pyramid
from odometry.temporal import (
    SequenceState,
    TemporalInteraction,
    cascade_only_update,
    ego_feature_init,
    ego_refine,
    predict_initial_pose,
    step_sequence_state,
    temporal_encode,
    update_refine,
)
from overwatch import initialize_overwatch
from util import resolve_dtype

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


# === Stage Timing ===
class StageTimer:
    """Wall-clock durations per named stage; reported as medians."""

    def __init__(self) -> None:
        self.durations: Dict[str, List[float]] = defaultdict(list)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        yield
        self.durations[name].append(time.perf_counter() - start)

    def medians(self) -> Dict[str, float]:
        return {name: float(np.median(values)) for name, values in self.durations.items()}


def _stage(timer: Optional[StageTimer], name: str):
    return timer.stage(name) if timer is not None else nullcontext()


@dataclass(frozen=True)
class EncodedFrame:
    queries: List[QuerySet]                                 # per level, finest first
    maps: List[FeatureMap]                                  # per level, finest first


@dataclass(frozen=True)
class StepOutput:
    estimates: List[PoseEstimate]                           # one per cascade layer, coarsest first
    refined: PoseEstimate                                   # final (updated) estimate of the pair
    ego: Optional[torch.Tensor]                             # refined ego feature (None with the temporal module off)


class DVLO4D(nn.Module):
    def __init__(self, cfg: ModelConfig, k_t0: float = 0.0, k_q0: float = -2.5, num_cameras: int = 1) -> None:
        super().__init__()
        self.cfg, self.dtype = cfg, resolve_dtype(cfg.dtype)
        self.num_cameras = num_cameras
        self.levels = cfg.encoder.levels
        self.pseudo_params = CylindricalParams(
            delta_theta=cfg.pseudo_image.delta_theta,
            delta_phi=cfg.pseudo_image.delta_phi,
            height=cfg.pseudo_image.h,
            width=cfg.pseudo_image.w,
            phi_center=cfg.pseudo_image.phi_center,
        )

        enc, slope = cfg.encoder, cfg.encoder.leaky_slope
        self.point_encoder = PointEncoder(enc.channels, enc.query_counts, leaky_slope=slope)
        self.image_encoder = ImageEncoder(enc.image_channels, enc.channels, enc.levels, leaky_slope=slope)
        self.fusions = nn.ModuleList(
            [
                SparseQueryFusion(
                    enc.channels,
                    num_cameras=num_cameras,
                    samples_per_query=cfg.fusion.samples_per_query,
                    heads=cfg.fusion.heads,
                    enable_global=cfg.fusion.enable_global,
                    enabled=cfg.fusion.enabled,
                )
                for _ in range(enc.levels)
            ]
        )
        self.cascade = PoseCascade(enc.channels, cfg.pose.knn, cfg.pose.levels, leaky_slope=slope)
        self.temporal = TemporalInteraction(enc.channels, cfg.temporal.ego_dim, cfg.temporal.heads, leaky_slope=slope)

        # Learnable loss scales are trained alongside the network
        self.k_t = nn.Parameter(torch.tensor(k_t0))
        self.k_q = nn.Parameter(torch.tensor(k_q0))

        self.to(self.dtype)

    @property
    def temporal_enabled(self) -> bool:
        return self.cfg.temporal.enabled

    def init_state(self) -> SequenceState:
        return SequenceState.fresh(self.cfg.temporal.ego_dim, self.cfg.temporal.t_h, self.dtype)

    # === Per-Frame Stages ===
    def encode(self, frame: Frame, timer: Optional[StageTimer] = None) -> EncodedFrame:
        with _stage(timer, "encode"):
            pseudo = build_pseudo_image(frame.cloud, self.pseudo_params)
            queries = point_feature_pyramid(pseudo, self.point_encoder)
            maps = image_feature_pyramid(frame.image, self.image_encoder)
        return EncodedFrame(queries, maps)

    def fuse(
        self, encoded: EncodedFrame, cameras: Sequence[CameraModel], timer: Optional[StageTimer] = None
    ) -> List[FusedQuerySet]:
        with _stage(timer, "fuse"):
            return [
                fusion(queries, [fmap], cameras)
                for queries, fmap, fusion in zip(encoded.queries, encoded.maps, self.fusions)
            ]

    # === Per-Pair Step ===
    def forward_step(
        self,
        src: Sequence[QuerySet],
        tgt: Sequence[QuerySet],
        state: SequenceState,
        timer: Optional[StageTimer] = None,
    ) -> StepOutput:
        """Predict (temporal) -> estimate (cascade) -> refine (update) -> push; `state` is updated in place."""
        top = self.levels - 1
        ego, enc = None, None
        if self.temporal_enabled:
            with _stage(timer, "temporal"):
                cv = self.cascade.correlate(top, src[top], tgt[top])
                ego = ego_refine(ego_feature_init(cv, self.temporal), state.mfb, self.temporal)
                enc = temporal_encode(state.mpb, self.temporal)
                initial = predict_initial_pose(ego, enc, self.temporal, level=top)
        else:
            initial = PoseEstimate(RigidMotion.identity(self.dtype), level=top)

        with _stage(timer, "cascade"):
            estimates = run_pyramid(src, tgt, initial, self.cascade)

        with _stage(timer, "update"):
            if enc is not None:
                refined = update_refine(estimates[-1], enc, self.temporal)
            else:
                refined = cascade_only_update(estimates[-1])

        if ego is not None:
            step_sequence_state(state, ego, refined.motion)
        return StepOutput(estimates, refined, ego)

    def forward(
        self,
        frames: Sequence[Frame],
        cameras: Sequence[CameraModel],
        state: Optional[SequenceState] = None,
        timer: Optional[StageTimer] = None,
    ) -> List[StepOutput]:
        """Run over consecutive frame pairs; every frame is encoded & fused once."""
        state = state if state is not None else self.init_state()
        outputs, previous = [], None
        for frame in frames:
            fused = self.fuse(self.encode(frame, timer), cameras, timer)
            if previous is not None:
                outputs.append(self.forward_step(fused, previous, state, timer))
            previous = fused
        return outputs


@torch.no_grad()
def estimate_motions(
    model: DVLO4D, frames: Sequence[Frame], cameras: Sequence[CameraModel], timer: Optional[StageTimer] = None
) -> List[RigidMotion]:
    """Relative motions (frame i+1 -> frame i) over a whole sequence with one persistent temporal state."""
    model.eval()
    overwatch.info(f"Estimating {max(len(frames) - 1, 0)} relative motions", ctx_level=1)
    return [output.refined.motion for output in model(frames, cameras, model.init_state(), timer)]


@torch.no_grad()
def profile_stages(
    model: DVLO4D, frames: Sequence[Frame], cameras: Sequence[CameraModel], runs: int
) -> Dict[str, float]:
    """Median wall-clock seconds per stage over `runs` warm runs of the first frame pair."""
    model.eval()
    model(frames[:2], cameras)
    timer = StageTimer()
    for _ in range(runs):
        model(frames[:2], cameras, timer=timer)
    return timer.medians()
