"""Runtime switches read from the environment.

``DYADICW_DISABLE_JIT=1`` routes every hot kernel through its pure-numpy
implementation instead of the numba one.  ``DYADICW_THREADS`` caps the number
of numba worker threads.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

_TRUE = {"1", "true", "yes", "on"}

_state = {"jit": os.environ.get("DYADICW_DISABLE_JIT", "").strip().lower() not in _TRUE}


def jit_enabled() -> bool:
    """Return True when numba kernels are selected."""
    return _state["jit"]


def set_jit(enabled: bool) -> None:
    """Select numba kernels (True) or the numpy fallback (False)."""
    _state["jit"] = bool(enabled)


@contextmanager
def jit_mode(enabled: bool):
    """Temporarily switch kernel backend."""
    old = _state["jit"]
    _state["jit"] = bool(enabled)
    try:
        yield
    finally:
        _state["jit"] = old


def thread_cap() -> int | None:
    """Parse ``DYADICW_THREADS``; None when unset or invalid."""
    raw = os.environ.get("DYADICW_THREADS", "").strip()
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        return None
    return value if value > 0 else None


def apply_thread_cap() -> None:
    cap = thread_cap()
    if cap is None:
        return
    import numba

    numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
