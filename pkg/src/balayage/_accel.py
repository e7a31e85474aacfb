"""JIT switch for the hot kernels.

Numba is used when importable unless ``BALAYAGE_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel falls back to its numpy path.
"""

import os

_FLAG = os.environ.get("BALAYAGE_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched without numba."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def select(jitted, fallback):
    return jitted if USE_NUMBA else fallback
