"""Occlusion-aware crowd imputation from social ties."""
from ._accel import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
