"""
Terminal colors for console output and log records
"""

import os
import sys

OKBLUE = '\033[94m'
OKCYAN = '\033[96m'
OKGREEN = '\033[92m'
YELLOW = '\033[93m'
FAIL = '\033[91m'
ENDC = '\033[0m'
BOLD = '\033[1m'
DIM = '\033[2m'
ITALIC = '\033[3m'

LEVEL_COLORS = {
    "DEBUG": DIM,
    "INFO": OKCYAN,
    "WARNING": YELLOW,
    "ERROR": FAIL,
    "CRITICAL": FAIL + BOLD,
}

def enabled(stream=sys.stderr) -> bool:
    """
    Colors are used only on terminals and can be switched off with NO_COLOR
    """
    if os.environ.get("NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()

def level_color(levelname: str) -> str:
    return LEVEL_COLORS.get(levelname, '')

def error(msg: str):
    """
    Wrap the message in red
    """
    return f"{FAIL}{BOLD}{msg}{ENDC}"
