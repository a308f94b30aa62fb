"""
base_strategy.py

Abstract class definition of a training strategy, with full annotations of class methods, utility functions, and
initialization logic. The clip loop itself lives here: epochs iterate over the clips of a `ClipSchedule`, temporal
memory is reset at every clip boundary, and each sub-clip is one optimizer step. Checkpoints carry the (clip, sub-clip)
cursor of the next step, so a resumed run skips exactly the steps already taken.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch
from tqdm import tqdm

from dataio.kitti import SequenceBundle
from odometry.dvlo import DVLO4D
from odometry.geom import RigidMotion
from odometry.temporal import SequenceState
from overwatch import initialize_overwatch
from training.clips import ClipSchedule, SubClip, make_clips
from training.losses import LossBreakdown
from training.metrics import OdometryMetrics

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


class NonFiniteLossError(ValueError):
    pass


def relative_ground_truth(bundle: SequenceBundle, start: int, length: int) -> List[RigidMotion]:
    """Ground-truth motions of pairs [start, start + length): frame i+1 -> frame i, i.e. gt_i⁻¹ · gt_{i+1}."""
    poses = bundle.gt_poses
    return [poses[idx].inverse().compose(poses[idx + 1]) for idx in range(start, start + length)]


def next_cursor(clip_idx: int, sub_idx: int, num_sub_clips: int) -> Tuple[int, int]:
    """(clip, sub-clip) position after `sub_idx`; finishing a clip rolls over to the start of the next one."""
    return (clip_idx + 1, 0) if sub_idx + 1 == num_sub_clips else (clip_idx, sub_idx + 1)


# === Abstract Base Class for an arbitrary Training Strategy ===
class TrainingStrategy(ABC):
    def __init__(
        self,
        model: DVLO4D,
        epochs: int,
        max_steps: Optional[int],
        learning_rate: float,
        adam_betas: Tuple[float, float],
        decay_factor: float,
        decay_every: int,
        lr_floor: float,
        alpha: Sequence[float],
        beta: float,
        t_c: int,
        t_s: int,
        shuffle_clips: bool = True,
        save_interval: Optional[int] = None,
        seed: int = 7,
        **_: str,
    ) -> None:
        self.model = model

        # Optimization Parameters
        self.epochs, self.max_steps, self.save_interval = epochs, max_steps, save_interval
        self.learning_rate, self.adam_betas = learning_rate, adam_betas
        self.decay_factor, self.decay_every, self.lr_floor = decay_factor, decay_every, lr_floor

        # Loss & Clip Parameters
        self.alpha, self.beta = tuple(alpha), beta
        self.t_c, self.t_s, self.shuffle_clips, self.seed = t_c, t_s, shuffle_clips, seed

        # Optimizers & Scheduler (initialized in `run_setup`)
        self.optimizer, self.lr_scheduler = None, None
        self.start_epoch, self.start_step = 0, 0
        self.start_cursor: Tuple[int, int] = (0, 0)
        self.resume_state: Optional[Dict[str, Any]] = None

        # Lightweight Validation
        assert len(self.alpha) == model.levels, f"Expected {model.levels} layer weights, got {self.alpha}"

    @abstractmethod
    def save_checkpoint(
        self,
        run_dir: Path,
        global_step: int,
        epoch: int,
        train_loss: Optional[float] = None,
        cursor: Tuple[int, int] = (0, 0),
        sequence_state: Optional[Dict[str, Any]] = None,
    ) -> Path: ...

    @abstractmethod
    def load_optimizer_and_scheduler(self, checkpoint_path: str) -> None: ...

    @abstractmethod
    def run_setup(self, run_dir: Path) -> None: ...

    @abstractmethod
    def train_step(
        self, bundle: SequenceBundle, sub_clip: SubClip, state: SequenceState, global_step: int
    ) -> Tuple[torch.Tensor, List[LossBreakdown]]: ...

    def schedule(self, bundles: Sequence[SequenceBundle]) -> ClipSchedule:
        return make_clips({b.sequence_id: len(b.frames) - 1 for b in bundles}, self.t_c, self.t_s)

    def run_training(self, bundles: Sequence[SequenceBundle], metrics: OdometryMetrics) -> Optional[float]:
        """Run the clip loop over `bundles`; log per-step CAL to `metrics`. Returns the last CAL (None if no step)."""
        by_id: Dict[str, SequenceBundle] = {bundle.sequence_id: bundle for bundle in bundles}
        schedule = self.schedule(bundles)
        if len(schedule) == 0:
            overwatch.warning(f"Clip schedule (T_C = {self.t_c}, T_s = {self.t_s}) holds no sub-clips")

        total = self.epochs * len(schedule) if self.max_steps is None else self.max_steps
        status, last_loss = metrics.get_status(), None
        with tqdm(total=total, initial=self.start_step, desc=status, leave=False) as progress:
            for epoch in range(self.start_epoch, self.epochs):
                self.model.train()
                resume_clip, resume_sub_clip = self.start_cursor if epoch == self.start_epoch else (0, 0)
                for clip_idx, clip in enumerate(schedule.epoch_order(self.seed, epoch, shuffle=self.shuffle_clips)):
                    if clip_idx < resume_clip:
                        continue

                    # Temporal memory resets at every clip boundary, unless resuming inside this clip
                    state, first_sub_clip = self.model.init_state(), 0
                    if clip_idx == resume_clip and resume_sub_clip > 0:
                        state.load_state_dict(self.resume_state)
                        first_sub_clip = resume_sub_clip

                    for sub_idx in range(first_sub_clip, len(clip.sub_clips)):
                        sub_clip = clip.sub_clips[sub_idx]
                        loss, breakdowns = self.train_step(by_id[clip.sequence_id], sub_clip, state, metrics.global_step)
                        last_loss = loss.item()

                        # Push Metrics
                        status = metrics.record_step(
                            epoch=epoch,
                            lr=self.lr_scheduler.get_last_lr()[0],
                            loss=loss,
                            refined=torch.stack([b.refined.detach() for b in breakdowns]).mean(),
                            k_t=self.model.k_t,
                            k_q=self.model.k_q,
                        )

                        # Check for Save Interval or Max Steps & Save Checkpoint
                        terminate = self.max_steps is not None and metrics.global_step >= self.max_steps
                        if terminate or (self.save_interval and metrics.global_step % self.save_interval == 0):
                            cursor = next_cursor(clip_idx, sub_idx, len(clip.sub_clips))
                            self.save_checkpoint(
                                metrics.run_dir,
                                metrics.global_step,
                                epoch,
                                last_loss,
                                cursor=cursor,
                                sequence_state=state.state_dict() if cursor[1] > 0 else None,
                            )
                        if terminate:
                            return last_loss

                        # Update Progress Bar
                        progress.update()
                        progress.set_description(status)

                # Learning-rate decay is epoch-based
                self.lr_scheduler.step()
                self.save_checkpoint(metrics.run_dir, metrics.global_step, epoch + 1, last_loss)

        return last_loss
