"""Kernel backend selection: compiled extension if available, NumPy otherwise.

Set ``LAYERPOT_PURE=1`` to force the NumPy fallback (used by the
benchmark for a like-for-like comparison).
"""

from __future__ import annotations

import os

from . import _kernels_fallback as _fallback

HAVE_EXT = False
if os.environ.get("LAYERPOT_PURE", "") != "1":
    try:
        from . import _kernels as _ext  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        _ext = None

if HAVE_EXT:
    inv_dist_power_sum = _ext.inv_dist_power_sum
    tk_component_sum = _ext.tk_component_sum
    inv_dist_power_matrix = _ext.inv_dist_power_matrix
else:
    inv_dist_power_sum = _fallback.inv_dist_power_sum
    tk_component_sum = _fallback.tk_component_sum
    inv_dist_power_matrix = _fallback.inv_dist_power_matrix

BACKEND = "compiled" if HAVE_EXT else "numpy"
