"""Backend selection for the hot kernels.

Set ``MSGCOV_BACKEND=numpy`` (or ``MSGCOV_DISABLE_NUMBA=1``) before import to
run the pure-numpy fallbacks. Numba is used when importable otherwise.
"""

from __future__ import annotations

import os

_requested = os.environ.get("MSGCOV_BACKEND", "").strip().lower()
_disabled = os.environ.get("MSGCOV_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _disabled and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
