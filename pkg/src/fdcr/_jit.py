"""Optional numba acceleration.

Set ``FDCR_NUMBA=0`` in the environment to force the pure-numpy paths. The
flag is read once at import time.
"""
import os

try:
    import numba as nb
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    nb = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("FDCR_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda func: func
    return nb.njit(*args, **kwargs)
