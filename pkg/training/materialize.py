"""
materialize.py

Factory class defining functions for instantiating various Training Strategies from a `TrainingConfig`.
"""

from conf import TrainingConfig
from odometry.dvlo import DVLO4D
from training.strategies import ClipStrategy, TrainingStrategy

# Registry =>> Maps ID --> {cls(), kwargs} :: clip-based CAL training; `clip-per-frame` pins T_s = 1
TRAIN_STRATEGIES = {
    "clip-cal": {"cls": ClipStrategy, "kwargs": {}},
    "clip-per-frame": {"cls": ClipStrategy, "kwargs": {"t_s": 1}},
}


def get_train_strategy(
    train_strategy: str,
    model: DVLO4D,
    cfg: TrainingConfig,
    seed: int,
) -> TrainingStrategy:
    if train_strategy in TRAIN_STRATEGIES:
        strategy_cfg = TRAIN_STRATEGIES[train_strategy]
        strategy_kwargs = {
            "model": model,
            "epochs": cfg.epochs,
            "max_steps": cfg.max_steps,
            "learning_rate": cfg.lr,
            "adam_betas": tuple(cfg.adam_betas),
            "decay_factor": cfg.decay_factor,
            "decay_every": cfg.decay_every,
            "lr_floor": cfg.lr_floor,
            "alpha": tuple(cfg.alpha),
            "beta": cfg.beta,
            "t_c": cfg.t_c,
            "t_s": cfg.t_s,
            "shuffle_clips": cfg.shuffle_clips,
            "save_interval": cfg.save_interval,
            "seed": seed,
        }
        strategy_kwargs.update(strategy_cfg["kwargs"])
        return strategy_cfg["cls"](**strategy_kwargs)
    else:
        raise ValueError(f"Train Strategy `{train_strategy}` is not supported!")
