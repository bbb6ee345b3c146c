"""Shooting, winding and barrier tools for cohomogeneity-one Einstein metrics on
sphere and product spaces with two isotropy summands."""

__version__ = "0.1.0"

from .model import Dims, StateXYH, StateYDH, StateZDH  # noqa: E402

__all__ = ["Dims", "StateZDH", "StateYDH", "StateXYH", "__version__"]
