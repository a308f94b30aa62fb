"""
load.py

Checkpoint serialization for DVLO4D. A checkpoint is a `torch.save` dictionary holding the model state, a parameter
manifest (every named tensor with its shape, in state-dict order), the model config it was built from, and, for
training runs, the optimizer / scheduler state, the epoch & step counters, and the (clip, sub-clip) cursor with the
in-flight clip's temporal memory, so that even a checkpoint written mid-epoch resumes bitwise.

Training runs lay checkpoints out as `<run_dir>/checkpoints/<name>.pt` next to `<run_dir>/config.json`.
"""

from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import torch

from conf import ModelConfig
from odometry.dvlo import DVLO4D
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)


class CheckpointError(ValueError):
    pass


# === Config (De)Serialization ===
def model_config_to_dict(cfg: ModelConfig) -> Dict[str, Any]:
    return asdict(cfg)


def model_config_from_dict(raw: Dict[str, Any]) -> ModelConfig:
    """Rebuild the registered variant named by `model_id`, then apply every stored (possibly overridden) field."""
    config_cls = ModelConfig.get_choice_class(raw["model_id"])
    defaults, fields = config_cls(), {}
    for name, value in raw.items():
        if isinstance(value, dict):
            value = type(getattr(defaults, name))(
                **{k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
            )
        fields[name] = value
    return config_cls(**fields)


# === Manifest ===
def parameter_manifest(model: torch.nn.Module) -> List[Tuple[str, List[int]]]:
    return [(name, list(tensor.shape)) for name, tensor in model.state_dict().items()]


def verify_manifest(model: torch.nn.Module, manifest: List[Tuple[str, List[int]]]) -> None:
    expected = parameter_manifest(model)
    if len(expected) != len(manifest):
        raise CheckpointError(f"Checkpoint lists {len(manifest)} tensors, model expects {len(expected)}")
    for (name, shape), (stored_name, stored_shape) in zip(expected, manifest):
        if name != stored_name or list(shape) != list(stored_shape):
            raise CheckpointError(
                f"Checkpoint tensor `{stored_name}` {list(stored_shape)} does not match model tensor `{name}` {shape}"
            )


# === Save / Load ===
def save_checkpoint(
    path: Union[str, Path],
    model: DVLO4D,
    optimizer: Optional[torch.optim.Optimizer] = None,
    scheduler: Optional[Any] = None,
    epoch: int = 0,
    global_step: int = 0,
    cursor: Tuple[int, int] = (0, 0),
    sequence_state: Optional[Dict[str, Any]] = None,
) -> Path:
    """`cursor` is the (clip, sub-clip) position within `epoch` to resume at; `sequence_state` is that clip's memory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "model": model.state_dict(),
            "manifest": parameter_manifest(model),
            "model_cfg": model_config_to_dict(model.cfg),
            "num_cameras": model.num_cameras,
            "optimizer": optimizer.state_dict() if optimizer is not None else None,
            "scheduler": scheduler.state_dict() if scheduler is not None else None,
            "epoch": epoch,
            "global_step": global_step,
            "cursor": list(cursor),
            "sequence_state": sequence_state,
        },
        path,
    )
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    if not (path := Path(path)).is_file():
        raise FileNotFoundError(f"Missing checkpoint `{path}`")
    checkpoint = torch.load(path, map_location="cpu", weights_only=False)
    for key in ("model", "manifest", "model_cfg"):
        if key not in checkpoint:
            raise CheckpointError(f"Checkpoint `{path}` has no `{key}` entry")
    return checkpoint


def load_model(path: Union[str, Path]) -> Tuple[DVLO4D, Dict[str, Any]]:
    """Instantiate the model described by a checkpoint and load its weights; returns (model, raw checkpoint)."""
    checkpoint = load_checkpoint(path)
    model_cfg = model_config_from_dict(checkpoint["model_cfg"])
    overwatch.info(
        f"Found Config =>> Loading [bold blue]{model_cfg.model_id}[/] with:\n"
        f"             Channels / Levels =>> [bold]{model_cfg.encoder.channels} / {model_cfg.encoder.levels}[/]\n"
        f"             Query Counts      =>> [bold]{model_cfg.encoder.query_counts}[/]\n"
        f"             Cameras           =>> [bold]{checkpoint.get('num_cameras', 1)}[/]\n"
        f"             Checkpoint Path   =>> [underline]`{path}`[/]"
    )
    model = DVLO4D(model_cfg, num_cameras=checkpoint.get("num_cameras", 1))
    verify_manifest(model, checkpoint["manifest"])
    model.load_state_dict(checkpoint["model"])
    return model, checkpoint
