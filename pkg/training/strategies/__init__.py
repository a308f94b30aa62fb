from .base_strategy import NonFiniteLossError, TrainingStrategy
from .clip_strategy import ClipStrategy
