"""Numba switch.

Set ``GEOPHASE_DISABLE_JIT=1`` (or run without numba installed) to use the
pure-numpy kernels instead of the compiled ones.
"""

import os

_flag = os.environ.get("GEOPHASE_DISABLE_JIT", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENABLED = numba is not None and _flag not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    # the bundled TBB is too old for numba; skip it instead of warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    from numba import njit, prange
else:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper

    def prange(*args):
        return range(*args)


__all__ = ["JIT_ENABLED", "njit", "prange"]
