"""
losses.py

Supervised pose losses with learnable uncertainty scales:

    L = ‖t_gt - t‖₁ · exp(-k_t) + k_t + min(‖q_gt - q‖₂, ‖q_gt + q‖₂) · exp(-k_q) + k_q

applied to every cascade layer (weighted by α, coarsest layer first) and to the refined output (weighted by β), then
averaged over the frames of a sub-clip (collective average loss).
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import torch

from odometry.geom import RigidMotion, rotation_distance
from odometry.pose import PoseEstimate


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class LossBreakdown:
    layer_losses: Tuple[torch.Tensor, ...]                  # L^l, coarsest layer first
    refined: torch.Tensor                                   # L_re
    alpha: Tuple[float, ...]
    beta: float
    k_t: torch.Tensor
    k_q: torch.Tensor
    total: torch.Tensor                                     # Σ α^l L^l + β L_re


def pose_loss(pred: RigidMotion, gt: RigidMotion, k_t: torch.Tensor, k_q: torch.Tensor) -> torch.Tensor:
    translation_error = (gt.translation - pred.translation).abs().sum()
    rotation_error = rotation_distance(gt.rotation, pred.rotation)
    return translation_error * torch.exp(-k_t) + k_t + rotation_error * torch.exp(-k_q) + k_q


def layer_loss(pred: PoseEstimate, gt: RigidMotion, k_t: torch.Tensor, k_q: torch.Tensor) -> torch.Tensor:
    return pose_loss(pred.motion, gt, k_t, k_q)


def refined_loss(pred: PoseEstimate, gt: RigidMotion, k_t: torch.Tensor, k_q: torch.Tensor) -> torch.Tensor:
    return pose_loss(pred.motion, gt, k_t, k_q)


def weighted_total(
    layer_losses: Sequence[torch.Tensor], refined: torch.Tensor, alpha: Sequence[float], beta: float
) -> torch.Tensor:
    if len(layer_losses) != len(alpha):
        raise ScheduleError(f"Got {len(alpha)} layer weights for {len(layer_losses)} cascade layers")
    total = beta * refined
    for weight, loss in zip(alpha, layer_losses):
        total = total + weight * loss
    return total


def frame_breakdown(
    estimates: Sequence[PoseEstimate],
    refined: PoseEstimate,
    gt: RigidMotion,
    k_t: torch.Tensor,
    k_q: torch.Tensor,
    alpha: Sequence[float],
    beta: float,
) -> LossBreakdown:
    layers = tuple(layer_loss(estimate, gt, k_t, k_q) for estimate in estimates)
    refined_value = refined_loss(refined, gt, k_t, k_q)
    return LossBreakdown(
        layer_losses=layers,
        refined=refined_value,
        alpha=tuple(alpha),
        beta=beta,
        k_t=k_t,
        k_q=k_q,
        total=weighted_total(layers, refined_value, alpha, beta),
    )


def collective_average_loss(frames: Sequence[LossBreakdown], alpha: Sequence[float], beta: float) -> torch.Tensor:
    """(1 / T_s) Σ_t (Σ_l α^l L^l_t + β L_re,t) over the frames of one sub-clip."""
    if len(frames) == 0:
        raise ScheduleError("Collective average loss needs at least one frame")
    totals = torch.stack([weighted_total(frame.layer_losses, frame.refined, alpha, beta) for frame in frames])
    return totals.sum() / len(frames)
