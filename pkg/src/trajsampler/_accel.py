"""Backend switch for the numeric kernels.

Setting ``TRAJSAMPLER_NO_NUMBA=1`` (or running without numba installed)
routes every kernel through its pure-numpy implementation.
"""
import os

_FLAG = os.environ.get("TRAJSAMPLER_NO_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def _noop(*args, **kwargs):
    def wrapper(func):
        return func

    return wrapper


if HAVE_NUMBA:
    njit = numba.njit
else:  # pragma: no cover
    njit = _noop
