"""
odom.py

`dvlo4d odom`: run odometry over one sequence and write the estimated trajectory (KITTI pose format plus an `x y z`
companion), a per-stage timing report, and, when ground truth is available, the odometry metrics.

Run with:
    - dvlo4d odom --data data/kitti --seq 07 --ckpt runs/toy/checkpoints/latest-checkpoint.pt --out runs/odom-07
    - dvlo4d odom --data data/synth --seq 00 --perturb half-rate
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from cli.common import build_model, print_rows, save_run_config
from conf import DataConfig, ModelConfig, ModelRegistry
from dataio.kitti import camera_frame_poses, load_sequence, read_velo_to_cam0, sequence_dir, write_trajectory, write_xyz
from evaluation import PerturbMode, Trajectory, accumulate, evaluate, perturb
from evaluation.metrics import report_rows
from odometry.dvlo import estimate_motions, profile_stages
from overwatch import initialize_overwatch
from util import enable_determinism

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


@dataclass
class OdomConfig:
    # fmt: off
    data: Path = Path("data/kitti")                         # Dataset root (KITTI layout: sequences/, poses/)
    seq: str = "00"                                         # Sequence id
    ckpt: Optional[Path] = None                             # [Optional] Checkpoint; a seeded model otherwise
    out: Path = Path("runs/odom")                           # Output directory
    seed: int = 7                                           # Random seed (model init & perturbation noise)
    perturb: Optional[str] = None                           # [Optional] "half-rate" | "gauss:<sigma>"
    timing_runs: int = 20                                   # Warm runs per stage for the timing report (0 = skip)

    # ModelConfig (`conf/models.py`); override with --model.type `ModelRegistry.<MODEL>.model_id`
    model: ModelConfig = field(
        default_factory=ModelConfig.get_choice_class(ModelRegistry.DVLO4D_TOY.model_id)
    )
    kitti: DataConfig = field(default_factory=DataConfig)
    # fmt: on


def odom(cfg: OdomConfig) -> int:
    overwatch.info("DVLO4D Odometry :: Warming Up")
    mode = PerturbMode.parse(cfg.perturb) if cfg.perturb is not None else None
    enable_determinism()

    bundle = load_sequence(cfg.data, cfg.seq, camera=cfg.kitti.camera, gt_frame=cfg.kitti.gt_frame)
    if mode is not None:
        bundle = perturb(bundle, mode, seed=cfg.seed)
    model = build_model(cfg.model, cfg.ckpt, cfg.seed, num_cameras=len(bundle.cameras))
    save_run_config(cfg, cfg.out)

    # Estimate & Chain Relative Motions
    motions = estimate_motions(model, bundle.frames, bundle.cameras)
    trajectory = accumulate(motions, dtype=model.dtype)
    poses = trajectory.as_list()
    if cfg.kitti.gt_frame == "camera":
        poses = camera_frame_poses(poses, read_velo_to_cam0(sequence_dir(cfg.data, cfg.seq) / "calib.txt"))
    write_trajectory(poses, cfg.out / f"{cfg.seq}.txt")
    write_xyz(poses, cfg.out / f"{cfg.seq}_xyz.txt")
    overwatch.info(f"Wrote {len(poses)} poses ({len(motions)} relative motions) to `{cfg.out / f'{cfg.seq}.txt'}`")

    # Timing Report (never part of the deterministic artifacts)
    if cfg.timing_runs > 0 and len(bundle.frames) >= 2:
        medians = profile_stages(model, bundle.frames, bundle.cameras, cfg.timing_runs)
        report = {"runs": cfg.timing_runs, "stages_ms": {name: 1e3 * sec for name, sec in sorted(medians.items())}}
        report["total_ms"] = sum(report["stages_ms"].values())
        (cfg.out / "timing.json").write_text(json.dumps(report, indent=2) + "\n")
        overwatch.info(f"Median per-pair latency {report['total_ms']:.1f} ms over {cfg.timing_runs} warm runs")

    # Metrics (if ground truth is available)
    if bundle.gt_poses is not None and len(bundle.frames) >= 2:
        metrics = evaluate(trajectory, Trajectory.from_poses(bundle.gt_poses))
        metrics.write_json(cfg.out / "metrics.json")
        metrics.write_kv(cfg.out / "metrics.txt")
        print_rows(f"Sequence {cfg.seq}", report_rows(metrics))

    return 0
