"""Kernel selection: compiled extension if built, numpy fallback otherwise.

Set HYMGLUE_PURE_PY=1 to force the fallback (used by the benchmark and the
kernel-equivalence tests).
"""

import os

from . import _kernels_py

if os.environ.get("HYMGLUE_PURE_PY"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def holder_pair_sup(vals, pts, alpha, min_sep, max_sep):
    import numpy as np

    vals = np.ascontiguousarray(np.atleast_2d(vals), dtype=np.complex128)
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    if vals.shape[0] != pts.shape[0]:
        raise ValueError("vals and pts must have one row per node")
    return float(_impl.holder_pair_sup(vals, pts, float(alpha),
                                       float(min_sep), float(max_sep)))
