"""Optional numba acceleration.

Every hot kernel in this package has a numba-compiled loop version and a
vectorised numpy version. The numba path is used when numba imports and the
environment variable ``ICL_DISABLE_NUMBA`` is not set to a truthy value.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

DISABLE_FLAG = "ICL_DISABLE_NUMBA"
_TRUTHY = {"1", "true", "yes", "on"}

HAS_NUMBA = numba is not None


def numba_requested():
    return os.environ.get(DISABLE_FLAG, "").strip().lower() not in _TRUTHY


USE_NUMBA = HAS_NUMBA and numba_requested()


def njit(fn):
    """Compile ``fn`` with numba when it is installed, else return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)


def backend():
    return "numba" if USE_NUMBA else "numpy"
