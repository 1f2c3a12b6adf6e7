"""Backend selection for the hot kernels.

Set ``ROBINCAP_DISABLE_NUMBA=1`` to force the pure-numpy code paths. When
numba is not importable the numpy paths are used automatically.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("ROBINCAP_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def njit(fn):
    """``numba.njit(cache=True, nogil=True)`` when numba is present, else identity."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
