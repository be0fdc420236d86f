"""Numba switch.

Hot kernels are written twice: an ``@njit`` version and a pure-numpy
version. Which one runs is decided at call time from the environment, so
``TSALLIS_LAB_DISABLE_NUMBA=1`` forces the numpy path without reimporting
anything. A missing numba install silently falls back to numpy.
"""
from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "TSALLIS_LAB_DISABLE_NUMBA"


def numba_enabled(override: bool | None = None) -> bool:
    if override is not None:
        return bool(override) and HAVE_NUMBA
    flag = os.environ.get(ENV_FLAG, "").strip().lower()
    return HAVE_NUMBA and flag not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or an identity decorator."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
