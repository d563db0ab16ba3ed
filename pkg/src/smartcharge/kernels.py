"""Kernel dispatch: the compiled core when it imports, else the NumPy fallback.

Set ``SMARTCHARGE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from smartcharge import _kernels_py

BACKEND = "python"

if os.environ.get("SMARTCHARGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from smartcharge import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

greedy_fill = _impl.greedy_fill
build_cuts = _impl.build_cuts

__all__ = ["BACKEND", "build_cuts", "greedy_fill"]
