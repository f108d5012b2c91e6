"""Distributionally robust CBF navigation for a LiDAR-equipped unicycle."""

from ._jit import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
