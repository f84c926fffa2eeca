"""Numba acceleration toggle.

Hot kernels (neighbor scan, kernel density sums) live in plain-numpy form
and get JIT-compiled when acceleration is on. Set ``CULTURE_BRIDGE_NUMBA=0``
to force the pure-numpy path; the default is on whenever numba imports.
Both paths compute the same thing; ``benchmarks/bench_kernels.py`` times them
against each other.
"""

import os

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco if not (args and callable(args[0])) else args[0]

_FALSY = {"0", "false", "off", "no"}


def numba_enabled() -> bool:
    return HAS_NUMBA and os.environ.get("CULTURE_BRIDGE_NUMBA", "1").lower() not in _FALSY


def jit_kernel(fn):
    """Return the compiled variant of ``fn`` (or ``fn`` itself without numba)."""
    if HAS_NUMBA:
        return njit(cache=True)(fn)
    return fn
