"""Numba/numpy backend selection.

Hot kernels (mixture root solves, Monte Carlo epoch counting, infimum
scans) are compiled with numba when it is importable and the environment
variable ``FDPSGD_DISABLE_NUMBA`` is unset.  Setting ``FDPSGD_DISABLE_NUMBA=1``
forces the pure-numpy fallbacks; ``benchmarks/bench_backends.py`` compares
the two paths.
"""

import os

__all__ = ["NUMBA_ENABLED", "maybe_njit", "backend_name"]

_DISABLED = os.environ.get("FDPSGD_DISABLE_NUMBA", "0") not in ("", "0")

try:
    from numba import njit as _njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAS_NUMBA = False

NUMBA_ENABLED = _HAS_NUMBA and not _DISABLED


def maybe_njit(func=None, **kwargs):
    """Apply ``numba.njit`` when the numba backend is active, else no-op."""
    if func is None:
        return lambda f: maybe_njit(f, **kwargs)
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return _njit(**kwargs)(func)
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
