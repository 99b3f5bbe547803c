"""Backend switch for the hot kernels.

``HKDELAY_BACKEND=numpy`` forces the pure-numpy paths; the default is numba
when it imports cleanly. The choice is made once, at import time.
"""

from __future__ import annotations

import os
import warnings

_requested = os.environ.get("HKDELAY_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    warnings.warn(f"unknown HKDELAY_BACKEND={_requested!r}, using numba", stacklevel=2)
    _requested = "numba"

USE_NUMBA = False
if _requested == "numba":
    try:
        import numba as _numba

        USE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba not importable, falling back to numpy kernels", stacklevel=2)

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba when the numba backend is active."""
    if USE_NUMBA:
        return _numba.njit(cache=True, nogil=True)(func)
    return func
