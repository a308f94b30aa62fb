"""
overwatch.py

Centralized/standardized logger built on Rich. Every module grabs its own handle via `initialize_overwatch(__name__)`;
messages accept an extra `ctx_level` kwarg that indents nested steps (`[*]` for top-level, `|=>` for sub-steps).

The root level comes from `DVLO_LOG_LEVEL` (default INFO).
"""

import logging
import logging.config
import os
from logging import LoggerAdapter
from typing import Any, ClassVar, Dict, MutableMapping, Tuple

# Overwatch Default Format String
RICH_FORMATTER, DATEFMT = "| >> %(message)s", "%m/%d [%H:%M:%S]"

# Set Logging Configuration
LOG_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {"simple-console": {"format": RICH_FORMATTER, "datefmt": DATEFMT}},
    "handlers": {
        "console": {
            "class": "rich.logging.RichHandler",
            "formatter": "simple-console",
            "markup": True,
            "rich_tracebacks": True,
            "show_level": True,
            "show_path": True,
            "show_time": True,
        }
    },
    "root": {"level": os.environ.get("DVLO_LOG_LEVEL", "INFO"), "handlers": ["console"]},
}
logging.config.dictConfig(LOG_CONFIG)


# === Custom Contextual Logging Logic ===
class ContextAdapter(LoggerAdapter):
    CTX_PREFIXES: ClassVar[Dict[int, str]] = {**{0: "[*] "}, **{idx: "|=> ".rjust(4 + (idx * 4)) for idx in [1, 2, 3]}}

    def process(self, msg: str, kwargs: MutableMapping[str, Any]) -> Tuple[str, MutableMapping[str, Any]]:
        ctx_level = kwargs.pop("ctx_level", 0)
        return f"{self.CTX_PREFIXES[ctx_level]}{msg}", kwargs


class Overwatch:
    def __init__(self, name: str) -> None:
        self.logger = ContextAdapter(logging.getLogger(name), extra={})

        # Logger Delegation
        self.debug = self.logger.debug
        self.info = self.logger.info
        self.warning = self.logger.warning
        self.error = self.logger.error
        self.critical = self.logger.critical


def initialize_overwatch(name: str) -> Overwatch:
    return Overwatch(name)
