"""leontief-mech: optimal selling mechanisms for a pair of divisible complements."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("leontief-mech")
except PackageNotFoundError:
    __version__ = "unknown"

__all__ = ["__version__"]
