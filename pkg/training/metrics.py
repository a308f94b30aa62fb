"""
metrics.py

Per-step training records and the trackers they are fired to (JSONL loss curve, Weights & Biases). The JSONL tracker is
the training loss curve: `<run_dir>/<run_id>.jsonl`, one record per optimizer step, plus `run-metrics.jsonl` holding
the run's hyperparameters. The curve leaves out wall-clock step time, so same-seed reruns write the same bytes.
"""

import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Deque, Dict, Optional, Protocol, Tuple, Union

import jsonlines
import numpy as np
import torch
import wandb

from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

PREFIX = "Odometry Train"


@dataclass(frozen=True)
class StepRecord:
    # fmt: off
    step: int                                               # Global optimizer step (1-based once taken)
    epoch: int
    cal: float                                              # Collective average loss of the sub-clip
    cal_smoothed: float                                     # Mean CAL over the smoothing window
    refined: float                                          # Mean refined-pose loss over the sub-clip frames
    k_t: float
    k_q: float
    lr: float
    step_time: float                                        # Seconds since the previous step
    # fmt: on

    def to_metrics(self, include_timing: bool = True) -> Dict[str, Union[int, float]]:
        metrics = {
            f"{PREFIX}/Step": self.step,
            f"{PREFIX}/Epoch": self.epoch,
            f"{PREFIX}/CAL": self.cal,
            f"{PREFIX}/CAL (Smoothed)": self.cal_smoothed,
            f"{PREFIX}/Refined Loss": self.refined,
            f"{PREFIX}/k_t": self.k_t,
            f"{PREFIX}/k_q": self.k_q,
            f"{PREFIX}/Learning Rate": self.lr,
        }
        if include_timing:
            metrics[f"{PREFIX}/Step Time"] = self.step_time
        return metrics


# === Define Tracker Interface ===
class Tracker(Protocol):
    def write_hyperparameters(self) -> None: ...

    def write(self, record: StepRecord) -> None: ...

    def finalize(self) -> None: ...


# === Individual Tracker Definitions ===
class JSONLinesTracker:
    def __init__(self, run_id: str, run_dir: Path, hparams: Dict[str, Any], **_: Any) -> None:
        self.curve, self.run_metrics = run_dir / f"{run_id}.jsonl", run_dir / "run-metrics.jsonl"
        self.run_id, self.hparams = run_id, hparams

    def write_hyperparameters(self) -> None:
        with jsonlines.open(self.run_metrics, mode="w", sort_keys=True) as js_tracker:
            js_tracker.write({"run_id": self.run_id, "hparams": self.hparams})

    def write(self, record: StepRecord) -> None:
        with jsonlines.open(self.curve, mode="a", sort_keys=True) as js_tracker:
            js_tracker.write(record.to_metrics(include_timing=False))

    def finalize(self) -> None:
        return


class WeightsBiasesTracker:
    def __init__(
        self,
        run_id: str,
        run_dir: Path,
        hparams: Dict[str, Any],
        project: str = "dvlo4d",
        entity: Optional[str] = None,
        group: str = "odometry-train",
    ) -> None:
        self.hparams = hparams
        wandb.init(name=run_id, dir=run_dir, config=hparams, project=project, entity=entity, group=group)

    def write_hyperparameters(self) -> None:
        wandb.config.update(self.hparams, allow_val_change=True)

    def write(self, record: StepRecord) -> None:
        wandb.log(record.to_metrics(), step=record.step)

    def finalize(self) -> None:
        wandb.finish()


# Registry =>> Maps tracker name --> Tracker constructor
TRACKERS: Dict[str, Callable[..., Tracker]] = {"jsonl": JSONLinesTracker, "wandb": WeightsBiasesTracker}


# === Core Metrics Container :: Initializes Trackers => Builds & Fires Step Records ===
class OdometryMetrics:
    def __init__(
        self,
        active_trackers: Tuple[str, ...],
        run_id: str,
        run_dir: Path,
        hparams: Dict[str, Any],
        wandb_project: str = "dvlo4d",
        wandb_entity: Optional[str] = None,
        window_size: int = 10,
        resume_step: Optional[int] = None,
        resume_epoch: Optional[int] = None,
    ) -> None:
        self.run_id, self.run_dir = run_id, run_dir

        self.trackers = []
        for tracker_type in active_trackers:
            if tracker_type not in TRACKERS:
                raise ValueError(f"Tracker with type `{tracker_type}` is not supported!")
            tracker = TRACKERS[tracker_type](run_id, run_dir, hparams, project=wandb_project, entity=wandb_entity)
            tracker.write_hyperparameters()
            self.trackers.append(tracker)

        self.global_step = 0 if resume_step is None else resume_step
        self.epoch = 0 if resume_epoch is None else resume_epoch
        self.lr: Optional[float] = None
        self.window: Deque[float] = deque(maxlen=window_size)
        self.step_start_time = time.time()

    def get_status(self, loss: Optional[float] = None) -> str:
        status = f"=>> [Epoch {self.epoch:03d}] Global Step {self.global_step:06d}"
        if self.lr is not None:
            status += f" =>> LR :: {self.lr:.6f}"
        return status if loss is None else f"{status} - CAL :: {loss:.4f}"

    def record_step(
        self,
        *,
        epoch: int,
        lr: float,
        loss: torch.Tensor,
        refined: torch.Tensor,
        k_t: torch.Tensor,
        k_q: torch.Tensor,
    ) -> str:
        """Advance the global step, fire one `StepRecord` to every tracker, and return the progress-bar status."""
        now = time.time()
        self.global_step, self.epoch, self.lr = self.global_step + 1, epoch, lr
        self.window.append(loss.detach().item())

        record = StepRecord(
            step=self.global_step,
            epoch=epoch,
            cal=self.window[-1],
            cal_smoothed=float(np.mean(self.window)),
            refined=refined.detach().item(),
            k_t=k_t.detach().item(),
            k_q=k_q.detach().item(),
            lr=lr,
            step_time=now - self.step_start_time,
        )
        self.step_start_time = now

        for tracker in self.trackers:
            tracker.write(record)
        return self.get_status(record.cal_smoothed)

    def finalize(self) -> None:
        for tracker in self.trackers:
            tracker.finalize()
