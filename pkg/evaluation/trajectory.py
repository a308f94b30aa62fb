"""
trajectory.py

Absolute trajectories (world <- frame) stored as one batched `RigidMotion`, built by chaining frame-to-frame motions.
"""

from dataclasses import dataclass
from typing import List, Sequence, Union

import torch

from odometry.geom import RigidMotion


@dataclass(frozen=True)
class Trajectory:
    poses: RigidMotion                                      # batched: rotation (N, 4), translation (N, 3)

    def __post_init__(self) -> None:
        if self.poses.translation.dim() != 2 or self.poses.translation.shape[0] < 1:
            raise ValueError(f"A trajectory needs at least one pose, got {tuple(self.poses.translation.shape)}")

    @classmethod
    def from_poses(cls, poses: Sequence[RigidMotion]) -> "Trajectory":
        if len(poses) == 0:
            raise ValueError("A trajectory needs at least one pose")
        return cls(
            RigidMotion(torch.stack([p.rotation for p in poses]), torch.stack([p.translation for p in poses]))
        )

    def __len__(self) -> int:
        return self.poses.translation.shape[0]

    def __getitem__(self, index: Union[int, torch.Tensor]) -> RigidMotion:
        return RigidMotion(self.poses.rotation[index], self.poses.translation[index])

    def as_list(self) -> List[RigidMotion]:
        return [self[idx] for idx in range(len(self))]

    @property
    def path_lengths(self) -> torch.Tensor:
        """(N,) cumulative travelled distance, starting at 0."""
        steps = torch.linalg.vector_norm(self.poses.translation[1:] - self.poses.translation[:-1], dim=-1)
        return torch.cat((steps.new_zeros(1), torch.cumsum(steps, dim=0)))

    def relative_motions(self) -> List[RigidMotion]:
        """pose_i⁻¹ ∘ pose_{i+1} for every consecutive pair; `accumulate` inverts this."""
        return [self[idx].inverse().compose(self[idx + 1]) for idx in range(len(self) - 1)]


def accumulate(relatives: Sequence[RigidMotion], dtype: torch.dtype = torch.float64) -> Trajectory:
    """pose_0 = identity; pose_{i+1} = pose_i ∘ rel_i."""
    poses = [RigidMotion.identity(dtype)]
    for rel in relatives:
        poses.append(poses[-1].compose(RigidMotion(rel.rotation.to(dtype), rel.translation.to(dtype))))
    return Trajectory.from_poses(poses)
