"""Backend switch for the hot kernels.

Kernels are written once in a numba-compatible subset of numpy. By default
they are compiled with ``numba.njit``; setting ``AERIAL_NDT_JIT=0`` (or
running without numba installed) executes the very same functions as plain
numpy code, which is slower but easier to debug and profile.
"""
import os

_FLAG = os.environ.get("AERIAL_NDT_JIT", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


def maybe_njit(func):
    """Compile ``func`` with numba when the JIT backend is active."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
