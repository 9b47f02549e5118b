"""Command modules for the CLI"""

from .average_command import average
from .filter_command import filter
from .run_command import run
from .selftest_command import selftest
from .simulate_command import simulate

__all__ = ["simulate", "average", "filter", "run", "selftest"]
