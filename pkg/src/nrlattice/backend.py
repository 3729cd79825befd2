"""Numba/numpy backend selection and thread control.

The hot integrator loops have two implementations: jitted kernels in
``kernels.py`` and pure-numpy fallbacks. Selection order:

  1. runtime override via :func:`set_backend`
  2. env flag ``NRLATTICE_DISABLE_NUMBA=1`` forces the numpy path
  3. default: numba when importable

``NRLATTICE_THREADS`` (or the CLI ``--workers`` flag) sets the parallel
worker count. ``NUMBA_NUM_THREADS`` is raised before numba is first
imported so small boxes can still exercise several workers.
"""

from __future__ import annotations

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "16")

_override = None  # None = auto, True = numba, False = numpy


def _env_truthy(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def numba_available() -> bool:
    try:
        from . import kernels
        return kernels.HAS_NUMBA
    except ImportError:
        return False


def numba_enabled() -> bool:
    if _override is not None:
        return _override and numba_available()
    if _env_truthy("NRLATTICE_DISABLE_NUMBA"):
        return False
    return numba_available()


def set_backend(name):
    """Force 'numba' or 'numpy', or None to restore auto selection."""
    global _override
    if name is None:
        _override = None
    elif name == "numba":
        _override = True
    elif name == "numpy":
        _override = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def set_workers(n: int):
    """Set the parallel worker count used by the jitted kernels."""
    n = int(n)
    if n < 1:
        raise ValueError("worker count must be >= 1")
    if numba_available():
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def workers_from_env() -> int:
    raw = os.environ.get("NRLATTICE_THREADS", "").strip()
    if raw:
        return int(raw)
    return 1


def scratch_dir() -> str:
    return os.environ.get("NRLATTICE_SCRATCH", "") or os.getcwd()
