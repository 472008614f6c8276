"""Tomographic retrieval of noisy quantum maps and spectral ensemble diagnostics."""
from ._accel import backend

__version__ = "0.1.0"
SCHEMA_VERSION = 1

__all__ = ["__version__", "SCHEMA_VERSION", "backend"]
