"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of numpy and
compiled with ``njit`` when numba is importable and the environment flag
``CRANESAFE_USE_NUMBA`` is not set to ``0``.  Otherwise the same source
runs under the interpreter, which is slow but numerically identical up to
floating-point evaluation order.
"""

import os

_flag = os.environ.get("CRANESAFE_USE_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:  # pragma: no cover - exercised by the fallback CI job
    numba = None
    USE_NUMBA = False


def jit(func):
    """Compile ``func`` with ``numba.njit(cache=True)`` when enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
