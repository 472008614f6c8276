"""Numba switch.

Hot kernels are compiled with numba when it is importable and the environment
variable ``NISQSPEC_DISABLE_NUMBA`` is unset (or ``0``). Otherwise every kernel
falls back to its vectorized numpy twin, which computes the same quantity.
"""
import os

_flag = os.environ.get("NISQSPEC_DISABLE_NUMBA", "0").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

USE_NUMBA = _numba is not None and _flag in ("", "0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
