"""Numba/NumPy kernel selection.

Hot inner loops (convolution, bilinear resampling) ship in two versions: a
numba ``@njit`` kernel and a vectorized pure-NumPy fallback.  The active path
is chosen once per call via :func:`active`, so tests and benchmarks can flip
``FORCE_NUMPY`` at runtime.  Setting the environment variable
``GRASP_PSO_NO_NUMBA=1`` (checked at import) disables numba for the process.
"""

from __future__ import annotations

import os

_ENV_DISABLED = os.environ.get("GRASP_PSO_NO_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    from numba import njit  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


# Runtime override, mainly for tests and the kernel benchmark.
FORCE_NUMPY = False


def active() -> bool:
    """True when the numba kernels should be used for this call."""
    return HAS_NUMBA and not _ENV_DISABLED and not FORCE_NUMPY
