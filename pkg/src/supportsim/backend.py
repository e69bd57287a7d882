"""Kernel backend selection.

The hot numeric kernels (ray traversal, voxel rasterization) live in
``_kernel_impl`` as plain loops over numpy arrays.  When numba is importable
they are compiled with ``@njit``; otherwise, or when the environment variable
``SUPPORTSIM_BACKEND=numpy`` is set, the same functions run interpreted as a
pure-numpy fallback.  Both paths execute identical arithmetic in identical
order, so results do not depend on the backend.

``benchmarks/bench_backends.py`` measures the gap between the two paths.
"""

import os

_requested = os.environ.get("SUPPORTSIM_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"SUPPORTSIM_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

NUMBA_AVAILABLE = False
if _requested != "numpy":
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        if _requested == "numba":
            raise RuntimeError(
                "SUPPORTSIM_BACKEND=numba was requested but numba is not importable"
            )

USING_NUMBA = NUMBA_AVAILABLE


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if USING_NUMBA else "numpy"


def compile_kernel(func, *, parallel=False):
    """Return the numba-compiled version of a loop kernel, or the function
    itself when running on the pure-numpy backend."""
    if USING_NUMBA:
        from numba import njit

        return njit(cache=True, nogil=True, parallel=parallel)(func)
    return func
