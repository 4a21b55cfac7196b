"""Backend dispatch for the per-particle kernels.

``FENE_CLOSURE_BACKEND=numpy`` selects the pure-numpy path; anything else
(default ``numba``) uses the JIT-compiled kernels when numba imports cleanly.
Both backends expose the same functions with the same semantics; they agree to
rounding but are not bit-identical to each other.
"""

from __future__ import annotations

import importlib
import os

STRATEGY_EVEN = 0
STRATEGY_EVEN_STRESS = 1
STRATEGY_CASCADE = 2

_backend = None


def _load(name):
    return importlib.import_module(f"{__name__}._{name}")


def get():
    global _backend
    if _backend is None:
        use(os.environ.get("FENE_CLOSURE_BACKEND", "numba"))
    return _backend


def use(name: str):
    """Switch backend at runtime; returns the module."""
    global _backend
    name = name.strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba":
        try:
            _backend = _load("numba")
        except ImportError:
            _backend = _load("numpy")
    else:
        _backend = _load("numpy")
    return _backend


def backend_name() -> str:
    return get().NAME


def set_threads(n: int | None):
    """Set worker count for the numba backend; results do not depend on it."""
    if n is None:
        return
    if n < 1:
        raise ValueError("threads must be >= 1")
    if get().NAME != "numba":
        return
    import numba

    numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def get_threads() -> int:
    if get().NAME != "numba":
        return 1
    import numba

    return numba.get_num_threads()
