"""Pure-numpy fallback for the compiled pair-sup kernel.

Chunked so the pairwise distance matrix never exceeds ~32 MB regardless of
cloud size.  Must return bit-identical results to the Cython version (both
reduce with max over the same ratios).
"""

import numpy as np

_CHUNK = 2048


def holder_pair_sup(vals, pts, alpha, min_sep, max_sep):
    """sup over pairs of |vals[i]-vals[j]|_2 / |pts[i]-pts[j]|^alpha."""
    vals = np.ascontiguousarray(vals, dtype=np.complex128)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = vals.shape[0]
    best = 0.0
    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        # pairs (i, j) with j > i only; block against the tail j >= i0
        dv = vals[i0:i1, None, :] - vals[None, i0:, :]
        dp = pts[i0:i1, None, :] - pts[None, i0:, :]
        sep = np.sqrt(np.einsum("ijk,ijk->ij", dp, dp))
        diff = np.sqrt(np.einsum("ijk,ijk->ij", dv, dv.conj()).real)
        rows = np.arange(i0, i1)
        cols = np.arange(i0, n)
        upper = cols[None, :] > rows[:, None]
        ok = upper & (sep >= min_sep) & (sep <= max_sep)
        if ok.any():
            best = max(best, float((diff[ok] / sep[ok] ** alpha).max()))
    return best
