"""
common.py

Helpers shared by the command implementations: run-directory bookkeeping (config dumps), model construction or
checkpoint loading, and the rich summary table.
"""

import json
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple

import draccus
import yaml
from rich.console import Console
from rich.table import Table

from conf import ModelConfig
from odometry.dvlo import DVLO4D
from odometry.load import load_model
from overwatch import initialize_overwatch
from util import set_global_seed

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

console = Console()


def save_run_config(cfg: Any, run_dir: Path) -> None:
    """Save `config.yaml` via draccus, plus a JSON copy of the same document."""
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "config.yaml", "w") as f_yaml:
        draccus.dump(cfg, f_yaml)
    with open(run_dir / "config.yaml", "r") as f_yaml, open(run_dir / "config.json", "w") as f_json:
        yaml_cfg = yaml.safe_load(f_yaml)
        json.dump(yaml_cfg, f_json, indent=2)


def build_model(
    model_cfg: ModelConfig,
    ckpt: Optional[Path],
    seed: int,
    num_cameras: int = 1,
    k_t0: float = 0.0,
    k_q0: float = -2.5,
) -> DVLO4D:
    """Load `ckpt` if given (its stored config wins), otherwise build a freshly seeded model from `model_cfg`."""
    if ckpt is not None:
        model, _ = load_model(ckpt)
        if model.cfg.model_id != model_cfg.model_id:
            overwatch.warning(f"Checkpoint model `{model.cfg.model_id}` overrides `--model.type {model_cfg.model_id}`")
        return model

    set_global_seed(seed)
    overwatch.info(f"Initializing `{model_cfg.model_id}` from seed {seed}")
    return DVLO4D(model_cfg, k_t0=k_t0, k_q0=k_q0, num_cameras=num_cameras)


def print_rows(title: str, rows: Sequence[Tuple[str, str]]) -> None:
    table = Table(title=title)
    for name, _ in rows:
        table.add_column(name, justify="right")
    table.add_row(*[value for _, value in rows])
    console.print(table)
