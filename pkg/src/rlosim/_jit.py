"""Optional numba acceleration.

Kernels are written as plain Python on scalars and NumPy arrays; when numba
is importable they are compiled with ``njit(cache=True)``.  Setting
``RLOSIM_DISABLE_JIT=1`` forces the pure-Python path (same arithmetic, much
slower), which the test-suite uses to cross-check the two.
"""

import os

try:
    from numba import njit
except Exception:  # pragma: no cover - optional dependency
    njit = None

JIT_ENABLED = njit is not None and not os.environ.get("RLOSIM_DISABLE_JIT")


def jit(fn):
    if JIT_ENABLED:
        return njit(cache=True)(fn)
    return fn
