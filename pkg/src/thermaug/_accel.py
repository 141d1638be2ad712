"""Switch between numba-compiled and pure-numpy kernels.

The compiled path is used when numba imports cleanly, unless the environment
variable ``THERMAUG_DISABLE_NUMBA`` is set to a truthy value. The flag is read
once, at import time.
"""

from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("THERMAUG_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(fn):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    Compilation is lazy, so decorating costs nothing when the numpy path is
    selected.
    """
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
