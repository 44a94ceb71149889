"""Optional numba acceleration.

Hot kernels are written as plain loop functions and JIT-compiled with numba
by default.  Setting the environment variable ``SPOTSEG_NO_NUMBA=1`` (before
import) switches every kernel to its fallback path: vectorized numpy where
one exists, otherwise the same loop code interpreted by CPython.  The flag
exists for debugging and for environments without a working numba; the
interpreted push-relabel and labeling kernels are orders of magnitude slower
(see benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("SPOTSEG_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in {"1", "true", "yes", "on"}

if not NUMBA_DISABLED:
    try:
        from numba import njit as _numba_njit
        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(*args, **kwargs):
    """numba.njit when acceleration is active, identity decorator otherwise."""
    if USING_NUMBA:
        return _numba_njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap
