"""
metrics.py

Odometry metrics:
    - KITTI segment errors: for every start frame and segment length 100, 200, ..., 800 m, the relative-pose error
      between ground-truth and estimated segments; translation error in percent and rotation error in degrees per
      100 m, averaged over all attainable (start, length) pairs
    - ATE: translation RMSE after least-squares rigid alignment (rotation + translation, no scale)
    - RPE: per-frame translation RMSE of frame-to-frame relative-pose errors

Segment end: the first frame whose ground-truth path length exceeds start + length. Errors are normalized by the
ground-truth length actually travelled between the two frames.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from evaluation.trajectory import Trajectory
from odometry.geom import rotation_angle
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

SEGMENT_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)
DEGENERATE_CROSS_COVARIANCE = 1e-12


class NoSegmentsError(ValueError):
    pass


@dataclass
class MetricReport:
    # fmt: off
    t_rel: Optional[float]                                  # Percent (None when no segment is attainable)
    r_rel: Optional[float]                                  # Degrees per 100 m
    ate: float                                              # Meters
    rpe: float                                              # Meters per frame
    per_length: Dict[int, Dict[str, float]] = field(default_factory=dict)
    # fmt: on

    def to_dict(self) -> Dict[str, object]:
        return {**asdict(self), "per_length": {str(k): v for k, v in self.per_length.items()}}

    def write_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def write_kv(self, path: Union[str, Path]) -> None:
        lines = [f"{key} = {_fmt(getattr(self, key))}" for key in ("t_rel", "r_rel", "ate", "rpe")]
        for length, row in sorted(self.per_length.items()):
            lines += [f"{key}_{length} = {_fmt(value)}" for key, value in row.items()]
        Path(path).write_text("\n".join(lines) + "\n")


def _fmt(value: Optional[float]) -> str:
    return "none" if value is None else f"{value + 0.0:.9f}"


def _check_lengths(est: Trajectory, gt: Trajectory, minimum: int) -> None:
    if len(est) != len(gt):
        raise ValueError(f"Estimated trajectory has {len(est)} poses but ground truth has {len(gt)}")
    if len(est) < minimum:
        raise ValueError(f"Need at least {minimum} poses, got {len(est)}")


# === KITTI Segment Errors ===
def kitti_segment_errors(
    est: Trajectory, gt: Trajectory, lengths: Sequence[float] = SEGMENT_LENGTHS, step_size: int = 1
) -> Dict[int, Tuple[torch.Tensor, torch.Tensor]]:
    """Per segment length: (translation error / length, rotation radians / length) for every attainable start."""
    _check_lengths(est, gt, minimum=2)
    dist = gt.path_lengths.numpy()
    starts_all = np.arange(0, len(gt), step_size)

    errors = {}
    for length in lengths:
        ends = np.searchsorted(dist, dist[starts_all] + length, side="right")
        keep = ends < len(gt)
        if not keep.any():
            continue
        starts, ends = torch.from_numpy(starts_all[keep]), torch.from_numpy(ends[keep])

        gt_segment = gt[starts].inverse().compose(gt[ends])
        est_segment = est[starts].inverse().compose(est[ends])
        error = gt_segment.inverse().compose(est_segment)
        travelled = torch.from_numpy(dist[ends.numpy()] - dist[starts.numpy()])

        t_err = torch.linalg.vector_norm(error.translation, dim=-1) / travelled
        r_err = rotation_angle(error.rotation) / travelled
        errors[int(length)] = (t_err, r_err)
    return errors


def kitti_rel_errors(
    est: Trajectory, gt: Trajectory, lengths: Sequence[float] = SEGMENT_LENGTHS, step_size: int = 1
) -> Tuple[float, float]:
    """(t_rel in percent, r_rel in degrees per 100 m) averaged over every attainable (start, length) pair."""
    errors = kitti_segment_errors(est, gt, lengths, step_size)
    if not errors:
        raise NoSegmentsError(
            f"No attainable segment: ground truth covers {gt.path_lengths[-1].item():.2f} m < {min(lengths):.0f} m"
        )
    t_err = torch.cat([t for t, _ in errors.values()])
    r_err = torch.cat([r for _, r in errors.values()])
    return 100.0 * t_err.mean().item(), math.degrees(r_err.mean().item()) * 100.0


def per_length_breakdown(errors: Dict[int, Tuple[torch.Tensor, torch.Tensor]]) -> Dict[int, Dict[str, float]]:
    return {
        length: {
            "t_rel": 100.0 * t.mean().item(),
            "r_rel": math.degrees(r.mean().item()) * 100.0,
            "segments": float(t.numel()),
        }
        for length, (t, r) in errors.items()
    }


# === ATE / RPE ===
def rigid_alignment(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares (R, t) minimizing Σ‖R s_i + t - t_i‖²; identity rotation if the cross-covariance vanishes."""
    mu_s, mu_t = source.mean(axis=0), target.mean(axis=0)
    cross = (source - mu_s).T @ (target - mu_t)
    if np.abs(cross).max() < DEGENERATE_CROSS_COVARIANCE:
        return np.eye(3), mu_t - mu_s

    u, _, vt = np.linalg.svd(cross)
    reflection = np.diag([1.0, 1.0, np.sign(np.linalg.det(vt.T @ u.T)) or 1.0])
    rotation = vt.T @ reflection @ u.T
    return rotation, mu_t - rotation @ mu_s


def ate(est: Trajectory, gt: Trajectory) -> float:
    _check_lengths(est, gt, minimum=1)
    source, target = est.poses.translation.numpy(), gt.poses.translation.numpy()
    rotation, translation = rigid_alignment(source, target)
    residual = source @ rotation.T + translation - target
    return float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))


def rpe(est: Trajectory, gt: Trajectory) -> float:
    _check_lengths(est, gt, minimum=2)
    steps = torch.arange(len(gt) - 1)
    gt_step = gt[steps].inverse().compose(gt[steps + 1])
    est_step = est[steps].inverse().compose(est[steps + 1])
    error = gt_step.inverse().compose(est_step)
    return float(torch.sqrt((torch.linalg.vector_norm(error.translation, dim=-1) ** 2).mean()))


def evaluate(est: Trajectory, gt: Trajectory, lengths: Sequence[float] = SEGMENT_LENGTHS) -> MetricReport:
    """All metrics; a trajectory too short for any segment reports `t_rel` / `r_rel` as None."""
    errors = kitti_segment_errors(est, gt, lengths)
    t_rel: Optional[float] = None
    r_rel: Optional[float] = None
    if errors:
        t_rel, r_rel = kitti_rel_errors(est, gt, lengths)
    else:
        overwatch.warning(f"Ground truth spans {gt.path_lengths[-1].item():.2f} m; no segment errors reported")
    return MetricReport(
        t_rel=t_rel, r_rel=r_rel, ate=ate(est, gt), rpe=rpe(est, gt), per_length=per_length_breakdown(errors)
    )


def report_rows(report: MetricReport) -> List[Tuple[str, str]]:
    """Rows of the summary table printed by the CLI."""
    return [
        ("t_rel (%)", _fmt(report.t_rel)),
        ("r_rel (deg/100m)", _fmt(report.r_rel)),
        ("ATE (m)", _fmt(report.ate)),
        ("RPE (m)", _fmt(report.rpe)),
    ]
