"""
evaluate.py

`dvlo4d eval`: score an estimated trajectory against ground truth (both KITTI pose files of equal length).
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from cli.common import print_rows
from dataio.kitti import read_poses
from evaluation import Trajectory, evaluate
from evaluation.metrics import report_rows
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


@dataclass
class EvalConfig:
    # fmt: off
    est: Path = Path("runs/odom/00.txt")                    # Estimated trajectory (KITTI pose file)
    gt: Path = Path("data/kitti/poses/00.txt")              # Ground-truth trajectory (same frame as `est`)
    out: Optional[Path] = None                              # [Optional] Directory for metrics.json / metrics.txt
    # fmt: on


def evaluate_files(cfg: EvalConfig) -> int:
    est, gt = read_poses(cfg.est), read_poses(cfg.gt)
    if len(est) != len(gt):
        raise ValueError(f"`{cfg.est}` holds {len(est)} poses but `{cfg.gt}` holds {len(gt)}")

    report = evaluate(Trajectory.from_poses(est), Trajectory.from_poses(gt))
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        report.write_json(cfg.out / "metrics.json")
        report.write_kv(cfg.out / "metrics.txt")
        overwatch.info(f"Wrote metrics to `{cfg.out}`")
    print_rows(cfg.est.stem, report_rows(report))
    return 0
