"""Selects the motion kernel at import: compiled extension if present,
pure-Python fallback otherwise. ``TWINLINE_PURE_PYTHON=1`` forces the fallback
(used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _motion_py

if os.environ.get("TWINLINE_PURE_PYTHON") == "1":
    advance = _motion_py.advance
    IMPLEMENTATION = _motion_py.IMPLEMENTATION
else:
    try:
        from . import _motion  # type: ignore[attr-defined]

        advance = _motion.advance
        IMPLEMENTATION = _motion.IMPLEMENTATION
    except ImportError:
        advance = _motion_py.advance
        IMPLEMENTATION = _motion_py.IMPLEMENTATION
