"""Numba/NumPy backend selection for the hot kernels.

The package runs identically on two kernel backends:

* ``numba`` -- @njit-compiled loops (default whenever numba imports cleanly),
* ``numpy`` -- pure vectorized fallback.

Set the environment variable ``SCAMPI_DISABLE_NUMBA=1`` before import to force
the numpy path (useful for debugging and for the backend benchmark under
``benchmarks/``). The selected backend is fixed at import time.
"""

import os

_TRUTHY = ("1", "true", "yes", "on")


def numba_disabled_by_env() -> bool:
    return os.environ.get("SCAMPI_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


def resolve_backend() -> str:
    """Return the active backend name, 'numba' or 'numpy'."""
    if numba_disabled_by_env():
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


ACTIVE_BACKEND = resolve_backend()
