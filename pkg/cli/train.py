"""
train.py

`dvlo4d train`: clip-based training with the collective average loss. Trains on KITTI-layout sequences under `--data`,
or, without `--data`, on seeded synthetic sequences (one per `--seqs` entry). Writes checkpoints under
`<out>/checkpoints/`, the per-step loss curve `<out>/<run_id>.jsonl`, and the run configuration.

Run with:
    - dvlo4d train --out runs/toy --train.epochs 5                               (synthetic)
    - dvlo4d train --data data/kitti --seqs "[00,01]" --out runs/kitti --train.epochs 300 --model.type dvlo4d-full
    - dvlo4d train --out runs/toy --ckpt runs/toy/checkpoints/latest-checkpoint.pt --train.epochs 10   (resume)
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import draccus

from cli.common import build_model, save_run_config
from conf import DataConfig, ModelConfig, ModelRegistry, TrainingConfig
from dataio.kitti import SequenceBundle, load_sequence
from dataio.synth import SceneConfig, generate_sequence
from evaluation import PerturbMode, perturb
from overwatch import initialize_overwatch
from training import OdometryMetrics, get_train_strategy
from util import enable_determinism

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


@dataclass
class TrainCommandConfig:
    # fmt: off
    data: Optional[Path] = None                             # [Optional] Dataset root; synthetic sequences otherwise
    seqs: Tuple[str, ...] = ("00",)                         # Training sequence ids
    ckpt: Optional[Path] = None                             # [Optional] Checkpoint to resume from (end of an epoch)
    out: Path = Path("runs/train")                          # Run directory (checkpoints, loss curve, config)
    run_id: Optional[str] = None                            # Run ID for logging (derived from model & seed otherwise)
    seed: int = 7                                           # Random seed (init, clip order, synthetic scenes, noise)
    perturb: Optional[str] = None                           # [Optional] "half-rate" | "gauss:<sigma>"

    # Tracking Parameters
    trackers: Tuple[str, ...] = ("jsonl",)                  # Trackers to initialize ("jsonl", "wandb")
    wandb_project: str = "dvlo4d"                           # Name of W&B project to log to
    wandb_entity: Optional[str] = None                      # Name of entity to log under

    # ModelConfig (`conf/models.py`); override with --model.type `ModelRegistry.<MODEL>.model_id`
    model: ModelConfig = field(
        default_factory=ModelConfig.get_choice_class(ModelRegistry.DVLO4D_TOY.model_id)
    )
    train: TrainingConfig = field(default_factory=TrainingConfig)
    kitti: DataConfig = field(default_factory=DataConfig)
    scene: SceneConfig = field(default_factory=lambda: SceneConfig(frames=61))
    # fmt: on


def load_bundles(cfg: TrainCommandConfig, mode: Optional[PerturbMode]) -> List[SequenceBundle]:
    if cfg.data is None:
        bundles = [generate_sequence(cfg.scene, cfg.seed + idx, sequence_id=seq) for idx, seq in enumerate(cfg.seqs)]
    else:
        kitti = cfg.kitti
        bundles = [load_sequence(cfg.data, seq, camera=kitti.camera, gt_frame=kitti.gt_frame) for seq in cfg.seqs]

    for bundle in bundles:
        if bundle.gt_poses is None:
            raise FileNotFoundError(f"Training sequence `{bundle.sequence_id}` has no ground-truth poses")
    if mode is not None:
        bundles = [perturb(bundle, mode, seed=cfg.seed + idx) for idx, bundle in enumerate(bundles)]
    return bundles


def train(cfg: TrainCommandConfig) -> int:
    overwatch.info("DVLO4D Training :: Warming Up")
    mode = PerturbMode.parse(cfg.perturb) if cfg.perturb is not None else None
    enable_determinism()

    # Configure Unique Run Name & Save Directory
    run_id = cfg.run_id if cfg.run_id is not None else f"{cfg.model.model_id}+x{cfg.seed}"
    (run_dir := cfg.out).mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    save_run_config(cfg, run_dir)

    bundles = load_bundles(cfg, mode)
    model = build_model(
        cfg.model, cfg.ckpt, cfg.seed, num_cameras=len(bundles[0].cameras), k_t0=cfg.train.k_t0, k_q0=cfg.train.k_q0
    )
    num_params = sum(p.numel() for p in model.parameters())
    overwatch.info(f"# Parameters (in thousands): {num_params / 10**3:.3f} Total")

    # Create Train Strategy
    overwatch.info(f"Initializing Train Strategy `{cfg.train.train_strategy}`")
    strategy = get_train_strategy(cfg.train.train_strategy, model, cfg.train, cfg.seed)
    strategy.run_setup(run_dir=run_dir)
    if cfg.ckpt is not None:
        strategy.load_optimizer_and_scheduler(cfg.ckpt)
    elif (curve := run_dir / f"{run_id}.jsonl").exists():
        curve.unlink()

    # Create Metrics =>> Handles on the fly tracking, logging to specified trackers (e.g., JSONL, Weights & Biases)
    overwatch.info(f"Creating Metrics with Active Trackers => `{cfg.trackers}`")
    metrics = OdometryMetrics(
        cfg.trackers,
        run_id,
        run_dir,
        draccus.encode(cfg),
        wandb_project=cfg.wandb_project,
        wandb_entity=cfg.wandb_entity,
        resume_step=strategy.start_step,
        resume_epoch=strategy.start_epoch,
    )

    overwatch.info("Starting Odometry Training Loop")
    last_loss = strategy.run_training(bundles, metrics)
    if last_loss is None:
        path = strategy.save_checkpoint(
            run_dir,
            metrics.global_step,
            strategy.start_epoch,
            None,
            cursor=strategy.start_cursor,
            sequence_state=strategy.resume_state,
        )
        overwatch.info(f"No optimizer step taken; saved the current parameters to `{path}`")

    # Finalize
    overwatch.info("Done with Training =>> Finalizing Metrics")
    metrics.finalize()
    return 0
