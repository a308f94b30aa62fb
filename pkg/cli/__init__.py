from .main import COMMANDS, main
