"""Backend-selected kernel entry points.

Imports the loop kernels from ``_kernel_impl`` and compiles them with numba
unless the pure-numpy backend was selected (see ``backend``).  Benchmarks and
backend-equivalence tests can build both variants explicitly through
``kernels_for``.
"""

from types import SimpleNamespace

from . import _kernel_impl as _impl
from .backend import USING_NUMBA, compile_kernel

KERNEL_NAMES = (
    "ray_cast_batch",
    "count_column_crossings",
    "fill_column_crossings",
    "column_support_cells",
)


def kernels_for(backend: str) -> SimpleNamespace:
    """Build the kernel set for an explicit backend ("numba" or "numpy")."""
    if backend == "numpy":
        fns = {name: getattr(_impl, name) for name in KERNEL_NAMES}
    elif backend == "numba":
        from numba import njit

        fns = {
            name: njit(cache=True, nogil=True)(getattr(_impl, name))
            for name in KERNEL_NAMES
        }
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return SimpleNamespace(**fns)


if USING_NUMBA:
    ray_cast_batch = compile_kernel(_impl.ray_cast_batch)
    count_column_crossings = compile_kernel(_impl.count_column_crossings)
    fill_column_crossings = compile_kernel(_impl.fill_column_crossings)
    column_support_cells = compile_kernel(_impl.column_support_cells)
else:
    ray_cast_batch = _impl.ray_cast_batch
    count_column_crossings = _impl.count_column_crossings
    fill_column_crossings = _impl.fill_column_crossings
    column_support_cells = _impl.column_support_cells
