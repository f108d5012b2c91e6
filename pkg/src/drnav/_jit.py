"""Backend switch for the compiled kernels.

Set ``DRNAV_NO_JIT=1`` in the environment to run every hot kernel through its
pure numpy/Python fallback instead of numba.
"""

from __future__ import annotations

import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _have_numba() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_NUMBA = _have_numba()
JIT_DISABLED = os.environ.get("DRNAV_NO_JIT", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = HAVE_NUMBA and not JIT_DISABLED

if USE_NUMBA:
    from numba import njit as _numba_njit

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        if len(args) == 1 and callable(args[0]):
            return _numba_njit(**kwargs)(args[0])
        return _numba_njit(*args, **kwargs)

else:
    njit = _noop_jit


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
