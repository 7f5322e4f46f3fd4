"""Kernel backend selection.

Set ``NOMA_ROBUST_DISABLE_JIT=1`` to run the pure-numpy fallback kernels
instead of the numba-compiled ones (useful for debugging or when numba is
not installed).
"""

import os

_FLAG = os.environ.get("NOMA_ROBUST_DISABLE_JIT", "").strip().lower()

JIT_ENABLED = _FLAG not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper


def backend_name():
    return "numba" if JIT_ENABLED else "numpy"
