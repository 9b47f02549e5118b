"""Slow-fast homogenization and correlated-noise nonlinear filtering"""

from importlib.metadata import version

try:
    __version__ = version("homfilter")
except Exception:
    __version__ = "unknown"
