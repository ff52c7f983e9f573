# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-sup kernels for Holder seminorm estimation.

The seminorm of a sampled field is a supremum over all node pairs whose
separation lies in a window; that is an O(N^2) loop and dominates every
weighted-norm evaluation, so it lives here.  hymglue.kernels selects this
module when the extension was built and falls back to the numpy version
otherwise.
"""

from libc.math cimport sqrt, pow

import numpy as np

cimport numpy as cnp

cnp.import_array()


def holder_pair_sup(cnp.complex128_t[:, ::1] vals,
                    cnp.float64_t[:, ::1] pts,
                    double alpha, double min_sep, double max_sep):
    """sup over pairs (i,j) of |vals[i]-vals[j]|_2 / |pts[i]-pts[j]|^alpha.

    Pairs with separation outside [min_sep, max_sep] are skipped.  Returns
    0.0 when no pair qualifies.
    """
    cdef Py_ssize_t n = vals.shape[0]
    cdef Py_ssize_t d = vals.shape[1]
    cdef Py_ssize_t p = pts.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double best = 0.0
    cdef double sep2, diff2, dx, ratio
    cdef double min2 = min_sep * min_sep
    cdef double max2 = max_sep * max_sep
    cdef double re, im

    for i in range(n):
        for j in range(i + 1, n):
            sep2 = 0.0
            for k in range(p):
                dx = pts[i, k] - pts[j, k]
                sep2 += dx * dx
            if sep2 < min2 or sep2 > max2:
                continue
            diff2 = 0.0
            for k in range(d):
                re = vals[i, k].real - vals[j, k].real
                im = vals[i, k].imag - vals[j, k].imag
                diff2 += re * re + im * im
            ratio = sqrt(diff2) / pow(sqrt(sep2), alpha)
            if ratio > best:
                best = ratio
    return best
