"""Backend selection for the hot kernels.

Set ``CONFLAB_BACKEND=numpy`` to run every kernel as plain Python/numpy
(no JIT). The default is ``numba`` when it is importable. ``CONFLAB_THREADS``
caps the numba thread pool; results never depend on it.
"""

from __future__ import annotations

import os

BACKEND = os.environ.get("CONFLAB_BACKEND", "numba").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = BACKEND == "numba" and numba is not None

if USE_NUMBA:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is often too old; avoid the probe and its warning
        numba.config.THREADING_LAYER = "workqueue"
    _threads = os.environ.get("CONFLAB_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def jit(fn=None, *, parallel=False):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(cache=True, parallel=parallel)(f)
        return f

    if fn is None:
        return wrap
    return wrap(fn)


if USE_NUMBA:
    prange = numba.prange
else:
    prange = range


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
