"""Hot-loop kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``INDEXCURV_BACKEND``
(``numba`` or ``numpy``).  Without the variable numba is used when it imports;
any failure falls back to numpy silently.
"""

import os

from . import _numpy

BACKEND_ENV = "INDEXCURV_BACKEND"


def _select():
    wanted = os.environ.get(BACKEND_ENV, "").strip().lower()
    if wanted not in ("", "numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numpy":
        return _numpy, "numpy"
    try:
        from . import _numba
    except Exception:
        if wanted == "numba":
            raise
        return _numpy, "numpy"
    return _numba, "numba"


_impl, BACKEND = _select()

sublevel_euler = _impl.sublevel_euler
grid_local_minima = _impl.grid_local_minima
dedupe = _impl.dedupe
bin_stats = _impl.bin_stats
argmin_counts = _impl.argmin_counts

__all__ = [
    "BACKEND",
    "sublevel_euler",
    "grid_local_minima",
    "dedupe",
    "bin_stats",
    "argmin_counts",
]
