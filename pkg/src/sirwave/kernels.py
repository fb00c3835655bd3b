"""Selects the compiled step kernel when it is importable.

Set ``SIRWAVE_PURE_PYTHON=1`` to force the numpy version.
"""
import os

from . import _advance_py

if os.environ.get("SIRWAVE_PURE_PYTHON", "") not in ("", "0"):
    advance = _advance_py.advance
    BACKEND = "python"
else:
    try:
        from ._core import advance
        BACKEND = "cython"
    except ImportError:
        advance = _advance_py.advance
        BACKEND = "python"
