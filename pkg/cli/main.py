"""
main.py

Entry point of the `dvlo4d` command line: dispatches `dvlo4d <command> [--flags]` to the command's draccus config &
implementation. Flags follow draccus conventions (`--model.encoder.channels 32`, `--config_path run.yaml`; command line
beats config file beats defaults).

Exit codes:
    0 success, 1 verification failure, 2 usage / format error (bad flags, malformed inputs, missing files)
"""

import sys
from typing import Callable, Dict, List, Optional, Tuple, Type

import draccus

from cli.evaluate import EvalConfig, evaluate_files
from cli.odom import OdomConfig, odom
from cli.synth import SynthConfig, synth
from cli.train import TrainCommandConfig, train
from cli.verify import VerifyConfig, verify
from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2

# Registry =>> Maps command --> (config class, implementation)
COMMANDS: Dict[str, Tuple[Type, Callable[..., int]]] = {
    "odom": (OdomConfig, odom),
    "train": (TrainCommandConfig, train),
    "eval": (EvalConfig, evaluate_files),
    "synth": (SynthConfig, synth),
    "verify": (VerifyConfig, verify),
}


def usage() -> str:
    return f"usage: dvlo4d {{{','.join(COMMANDS)}}} [--flags] (see `dvlo4d <command> --help`)"


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in COMMANDS:
        overwatch.error(f"Unknown command `{argv[0]}`" if argv else "Missing command")
        print(usage(), file=sys.stderr)
        return EXIT_USAGE

    command, args = argv[0], list(argv[1:])

    # `verify <suite>` is accepted as shorthand for `verify --suite <suite>`
    if command == "verify" and args and not args[0].startswith("-"):
        args = ["--suite", args[0], *args[1:]]

    config_cls, run = COMMANDS[command]
    try:
        cfg = draccus.parse(config_class=config_cls, args=args, prog=f"dvlo4d {command}")
        return run(cfg)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (ValueError, AssertionError, OSError) as err:
        overwatch.error(f"`dvlo4d {command}` failed: {err}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
