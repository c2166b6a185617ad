import logging
import os
import sys

from beautifultable import BeautifulTable

from . import bcolors

try:
    from importlib.metadata import version as get_version, PackageNotFoundError
except ImportError:  # pragma: no cover
    from pkg_resources import get_distribution, DistributionNotFound as PackageNotFoundError

    def get_version(package_name):
        return get_distribution(package_name).version


def package_version() -> str:
    try:
        return get_version("uavopt")
    except PackageNotFoundError:
        return "0+unknown"


def print_welcome_message(command: str):
    print(f"uavopt {package_version()} ({command})")
    print("-" * 80)


def print_error(error):
    notes = ''.join(f"\n  - {note}" for note in error.notes())
    if error.context() is None:
        print(f"{bcolors.error(error.kind())}: {error.message()}{notes}", file=sys.stderr)
    else:
        print(f"{bcolors.error(error.kind())} {error.context()}: {error.message()}{notes}", file=sys.stderr)


class ColorFormatter(logging.Formatter):
    def __init__(self, use_color: bool):
        super().__init__("[%(name)s] %(levelname)s %(message)s")
        self.use_color = use_color

    def format(self, record):
        text = super().format(record)
        if self.use_color:
            return f"{bcolors.level_color(record.levelname)}{text}{bcolors.ENDC}"
        return text


def debug_enabled() -> bool:
    value = os.environ.get("UAVOPT_DEBUG", "")
    return value.lower() in {"1", "true", "yes", "on"}


def configure_logging(verbose: bool = False):
    """Attach a colored stderr handler to the package logger."""
    logger = logging.getLogger("uavopt")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ColorFormatter(bcolors.enabled(sys.stderr)))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose or debug_enabled() else logging.INFO)
    logger.propagate = False
    return logger


def print_table(headers, rows):
    table = BeautifulTable()
    table.columns.header = headers
    for row in rows:
        table.append_row(row)
    print(table)
