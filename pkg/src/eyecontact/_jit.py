"""Backend switch for the hot numeric kernels.

Kernels are compiled with numba when it is importable, unless the
environment variable ``EYECONTACT_NUMBA`` is set to ``0`` (or ``false``/
``off``). In that case the vectorized numpy implementations are used.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("EYECONTACT_NUMBA", "1").strip().lower()

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("0", "false", "off", "no")


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(cache=True)(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
