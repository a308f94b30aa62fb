from .models import (
    EncoderConfig,
    FusionConfig,
    ModelConfig,
    ModelRegistry,
    PoseConfig,
    PseudoImageConfig,
    TemporalConfig,
)
from .train import DataConfig, TrainingConfig
