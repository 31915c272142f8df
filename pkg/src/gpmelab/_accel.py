"""Backend switch for the hot loops.

The explicit and implicit time loops have two implementations: numba-compiled
scalar loops and vectorised numpy.  The numba path is used whenever numba can be
imported, unless ``GPMELAB_BACKEND=numpy`` is set in the environment.
"""

import os
from contextlib import contextmanager

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None

HAVE_NUMBA = numba is not None

_requested = os.environ.get("GPMELAB_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"GPMELAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_backend = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def using_backend(name):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
