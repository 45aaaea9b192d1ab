"""Backend selection for the compiled kernels.

Set ``AZNN_DISABLE_NUMBA=1`` to force the pure-numpy code path.  The flag is
read once at import time; tests and benchmarks that need both paths use the
explicit implementations in :mod:`aznn.kernels` instead of the selection.
"""

import os

_FLAG = "AZNN_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if args and callable(args[0]):
        return args[0]
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
