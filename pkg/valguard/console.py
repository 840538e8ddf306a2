"""
# Console - colored progress output
# All status lines go to stderr so stdout and report files stay clean
"""

import sys

from termcolor import colored

from valguard import settings

QUIET = settings.env_quiet()


def set_quiet(quiet: bool) -> None:
    global QUIET
    QUIET = quiet


def _emit(message: str, color: str, force: bool = False) -> None:
    if QUIET and not force:
        return
    print(colored(message, color), file=sys.stderr)


def status(message: str) -> None:
    _emit(message, "cyan")


def step(message: str) -> None:
    """Per-task progress line."""
    _emit(message, "magenta")


def success(message: str) -> None:
    _emit(message, "green")


def warn(message: str) -> None:
    _emit(f"⚠️  {message}", "yellow")


def failure(message: str) -> None:
    _emit(f"❌ {message}", "red", force=True)
