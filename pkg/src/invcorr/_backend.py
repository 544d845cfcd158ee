"""Kernel backend selection.

The compiled ``_speedups`` extension is used when importable; otherwise, or when
the environment variable ``INVCORR_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python kernels in ``_purepy`` are used.
"""

import os

from . import _purepy

OPTIMAL = _purepy.OPTIMAL
UNBOUNDED = _purepy.UNBOUNDED
ITERATION_LIMIT = _purepy.ITERATION_LIMIT


def _load():
    if os.environ.get("INVCORR_PURE_PYTHON", "") not in ("", "0"):
        return _purepy, "python"
    try:
        from . import _speedups
    except ImportError:
        return _purepy, "python"
    return _speedups, "cython"


kernels, BACKEND = _load()


def get_kernels(name=None):
    """Return the kernel module for ``name`` ("cython" or "python"), or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _purepy
    if name == "cython":
        from . import _speedups
        return _speedups
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    try:
        from . import _speedups  # noqa: F401
    except ImportError:
        return False
    return True
