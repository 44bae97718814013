"""Select the kernel implementation at import time.

The compiled ``_kernels`` module is used when importable; setting
``RTGL_BACKEND=python`` forces the numpy fallback.
"""
from __future__ import annotations

import importlib
import os
from types import ModuleType

from . import _fallback


def _load(name: str | None = None) -> tuple[str, ModuleType]:
    choice = (name or os.environ.get("RTGL_BACKEND", "auto")).lower()
    if choice == "python":
        return "python", _fallback
    try:
        return "compiled", importlib.import_module("rtgl._kernels")
    except ImportError:
        if choice == "compiled":
            raise
        return "python", _fallback


BACKEND_NAME, kernels = _load()


def get_kernels(name: str | None = None) -> ModuleType:
    """Return a specific backend module ("compiled" or "python"), or the active one."""
    if name is None:
        return kernels
    return _load(name)[1]
