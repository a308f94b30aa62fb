"""
torch_utils.py

General utilities for randomness, determinism, and dtype handling. Every command seeds through `set_global_seed`
before touching a model so that reruns with the same seed are bitwise reproducible.
"""

import os
import random

import numpy as np
import torch

_DTYPES = {"float64": torch.float64, "float32": torch.float32}


def set_global_seed(seed: int) -> None:
    """Sets seed for all randomness libraries (mostly random, numpy, torch)."""
    assert np.iinfo(np.uint32).min <= seed < np.iinfo(np.uint32).max, "Seed outside the np.uint32 bounds!"

    # Set Seed as an Environment Variable
    os.environ["EXPERIMENT_GLOBAL_SEED"] = str(seed)
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def enable_determinism() -> None:
    """Force deterministic kernels; odometry runs on CPU where every kernel we use has a deterministic path."""
    torch.use_deterministic_algorithms(True)
    torch.backends.cudnn.benchmark = False
    torch.backends.cudnn.deterministic = True


def resolve_dtype(name: str) -> torch.dtype:
    if name not in _DTYPES:
        raise ValueError(f"Dtype `{name}` is not supported!")
    return _DTYPES[name]
