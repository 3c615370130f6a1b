"""Kernel backend selection.

The compiled extension is used when it imports; ``TMSLAB_PURE=1`` forces the
Python fallback. ``use_backend`` switches at runtime (tests and benchmarks).
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _fallback if (_compiled is None or os.environ.get("TMSLAB_PURE") == "1") else _compiled


def name() -> str:
    return "compiled" if _active is _compiled else "python"


def compiled_available() -> bool:
    return _compiled is not None


def use_backend(which: str) -> None:
    global _active
    if which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    elif which == "python":
        _active = _fallback
    else:
        raise ValueError(f"unknown backend {which!r}")


def get(which: str | None = None):
    if which is None:
        return _active
    if which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    return _fallback


def dfs(*args, tables=None, **kw):
    if tables:
        return _fallback.dfs(*args, tables=tables, **kw)
    return _active.dfs(*args, **kw)


def heat_bath(*args):
    return _active.heat_bath(*args)
