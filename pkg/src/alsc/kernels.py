"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``ALSC_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy fallback is used.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()


def _pick() -> ModuleType:
    if os.environ.get("ALSC_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    return _compiled if _compiled is not None else _pykernels


impl: ModuleType = _pick()


def available() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get(name: str | None = None) -> ModuleType:
    """Return a backend module by name (``None``: the active one)."""
    if name is None:
        return impl
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def use(name: str) -> None:
    """Switch the active backend for subsequent calls."""
    global impl
    impl = get(name)
