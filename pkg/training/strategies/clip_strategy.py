"""
clip_strategy.py

Single-process training strategy for clip-based odometry training: Adam over every model parameter (including the
learnable loss scales k_t, k_q), an epoch-wise exponential learning-rate decay with a floor, and one optimizer step per
sub-clip on its collective average loss. Gradients never cross sub-clips: the memory banks store detached values.
"""

import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import torch
from torch.optim import Adam
from torch.optim.lr_scheduler import LambdaLR

from dataio.kitti import SequenceBundle
from odometry.load import CheckpointError, load_checkpoint, save_checkpoint
from odometry.temporal import SequenceState
from overwatch import initialize_overwatch
from training.clips import SubClip
from training.losses import LossBreakdown, collective_average_loss, frame_breakdown
from training.strategies.base_strategy import NonFiniteLossError, TrainingStrategy, relative_ground_truth

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


def first_non_finite(cal: torch.Tensor, breakdowns: List[LossBreakdown]) -> Optional[str]:
    for frame, breakdown in enumerate(breakdowns):
        for layer, loss in enumerate(breakdown.layer_losses):
            if not torch.isfinite(loss):
                return f"frame {frame} layer loss {layer} (coarsest first) = {loss.item()}"
        if not torch.isfinite(breakdown.refined):
            return f"frame {frame} refined loss = {breakdown.refined.item()}"
    if not torch.isfinite(cal):
        return f"collective average loss = {cal.item()}"
    return None


class ClipStrategy(TrainingStrategy):
    def run_setup(self, run_dir: Path) -> None:
        self.optimizer = Adam(self.model.parameters(), lr=self.learning_rate, betas=self.adam_betas)
        self.lr_scheduler = LambdaLR(self.optimizer, lr_lambda=self.decay_multiplier)
        overwatch.info(
            "Clip Strategy =>> Finalized Training Setup:\n"
            f"         |-> Learning Rate = {self.learning_rate} (x{self.decay_factor} every {self.decay_every} epochs)\n"
            f"         |-> Learning Rate Floor = {self.lr_floor}\n"
            f"         |-> Adam Betas = {self.adam_betas}\n"
            f"         |-> Clip / Sub-Clip Length = {self.t_c} / {self.t_s}\n"
            f"         |-> Layer Weights (coarsest first) = {self.alpha}, Refined Weight = {self.beta}\n"
            f"         |-> Epochs = {self.epochs}, Max Steps = {self.max_steps}\n"
        )

    def decay_multiplier(self, epoch: int) -> float:
        if self.learning_rate == 0:
            return 1.0
        return max(self.decay_factor ** (epoch // self.decay_every), self.lr_floor / self.learning_rate)

    def train_step(
        self, bundle: SequenceBundle, sub_clip: SubClip, state: SequenceState, global_step: int
    ) -> Tuple[torch.Tensor, List[LossBreakdown]]:
        frames = bundle.frames[sub_clip.start : sub_clip.start + sub_clip.length + 1]
        targets = relative_ground_truth(bundle, sub_clip.start, sub_clip.length)

        self.model.train()
        outputs = self.model(frames, bundle.cameras, state)
        breakdowns = [
            frame_breakdown(out.estimates, out.refined, gt, self.model.k_t, self.model.k_q, self.alpha, self.beta)
            for out, gt in zip(outputs, targets)
        ]
        cal = collective_average_loss(breakdowns, self.alpha, self.beta)
        if (culprit := first_non_finite(cal, breakdowns)) is not None:
            raise NonFiniteLossError(
                f"Non-finite loss at step {global_step} ({bundle.sequence_id} @ pair {sub_clip.start}): {culprit}"
            )

        self.optimizer.zero_grad()
        cal.backward()
        self.optimizer.step()
        return cal.detach(), breakdowns

    def save_checkpoint(
        self,
        run_dir: Path,
        global_step: int,
        epoch: int,
        train_loss: Optional[float] = None,
        cursor: Tuple[int, int] = (0, 0),
        sequence_state: Optional[Dict[str, Any]] = None,
    ) -> Path:
        checkpoint_dir = run_dir / "checkpoints"
        if train_loss is None:
            checkpoint_path = checkpoint_dir / f"step-{global_step:06d}-epoch-{epoch:02d}-loss=inf.pt"
        else:
            checkpoint_path = checkpoint_dir / f"step-{global_step:06d}-epoch-{epoch:02d}-loss={train_loss:.4f}.pt"

        # Save Checkpoint & Copy Latest to `latest-checkpoint.pt`
        save_checkpoint(
            checkpoint_path,
            self.model,
            self.optimizer,
            self.lr_scheduler,
            epoch,
            global_step,
            cursor=cursor,
            sequence_state=sequence_state,
        )
        shutil.copyfile(checkpoint_path, checkpoint_dir / "latest-checkpoint.pt")
        return checkpoint_path

    def load_optimizer_and_scheduler(self, checkpoint_path: str) -> None:
        """Restore optimizer / scheduler state, the epoch & step counters, and the (clip, sub-clip) resume cursor."""
        checkpoint = load_checkpoint(checkpoint_path)
        if checkpoint["optimizer"] is not None:
            self.optimizer.load_state_dict(checkpoint["optimizer"])
        if checkpoint["scheduler"] is not None:
            self.lr_scheduler.load_state_dict(checkpoint["scheduler"])
        self.start_epoch, self.start_step = checkpoint["epoch"], checkpoint["global_step"]
        self.start_cursor = tuple(checkpoint.get("cursor", (0, 0)))
        self.resume_state = checkpoint.get("sequence_state")
        if self.start_cursor[1] > 0 and self.resume_state is None:
            raise CheckpointError(f"Checkpoint `{checkpoint_path}` resumes inside a clip but stores no temporal memory")
        overwatch.info(
            f"Resuming from epoch {self.start_epoch}, step {self.start_step}, clip / sub-clip {self.start_cursor}"
            f" of `{checkpoint_path}`"
        )
