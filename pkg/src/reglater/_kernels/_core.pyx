# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: bin lookup, design assembly, per-bin streaming QR.

The QR accumulation applies Givens rotations row by row, so a single pass
over the samples maintains each bin's 2x2 upper-triangular factor and the
rotated targets without sorting or materializing the design matrix.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline Py_ssize_t _find_bin(const double* edges, Py_ssize_t nbins, double v) nogil:
    """Right-open bins, right-closed top bin, -1 outside."""
    cdef Py_ssize_t lo, hi, mid
    if v < edges[0] or v > edges[nbins]:
        return -1
    if v == edges[nbins]:
        return nbins - 1
    lo = 0
    hi = nbins  # invariant: edges[lo] <= v < edges[hi]
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if v >= edges[mid]:
            lo = mid
        else:
            hi = mid
    return lo


def bin_indices(cnp.ndarray[double, ndim=1] edges not None,
                cnp.ndarray[double, ndim=1] u not None):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t nbins = edges.shape[0] - 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef const double* e = <const double*> edges.data
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _find_bin(e, nbins, u[i])
    return out


def design_matrix(cnp.ndarray[double, ndim=1] edges not None,
                  cnp.ndarray[double, ndim=1] centers not None,
                  cnp.ndarray[double, ndim=1] norm0 not None,
                  cnp.ndarray[double, ndim=1] norm1 not None,
                  cnp.ndarray[double, ndim=1] u not None):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t nbins = centers.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n, 2 * nbins))
    cdef const double* e = <const double*> edges.data
    cdef Py_ssize_t i, k
    for i in range(n):
        k = _find_bin(e, nbins, u[i])
        if k >= 0:
            out[i, 2 * k] = norm0[k]
            out[i, 2 * k + 1] = norm1[k] * (u[i] - centers[k])
    return out


def binned_qr(cnp.ndarray[double, ndim=1] edges not None,
              cnp.ndarray[double, ndim=1] centers not None,
              cnp.ndarray[double, ndim=1] norm0 not None,
              cnp.ndarray[double, ndim=1] norm1 not None,
              cnp.ndarray[double, ndim=1] u not None,
              cnp.ndarray[double, ndim=1] x not None):
    """Single-pass Givens accumulation of each bin's thin QR.

    Returns (R, z, counts) with R[k] = (r11, r12, r22), z[k] = Q^T x in the
    bin's two directions; diagonal entries are nonnegative by construction.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t nbins = centers.shape[0]
    cdef cnp.ndarray[double, ndim=2] R = np.zeros((nbins, 3))
    cdef cnp.ndarray[double, ndim=2] z = np.zeros((nbins, 2))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(nbins, dtype=np.int64)
    cdef const double* e = <const double*> edges.data
    cdef Py_ssize_t i, k
    cdef double a, b, y, r, c, s, t1
    cdef double r11, r12, r22, z1, z2
    for i in range(n):
        k = _find_bin(e, nbins, u[i])
        if k < 0:
            continue
        counts[k] += 1
        a = norm0[k]
        b = norm1[k] * (u[i] - centers[k])
        y = x[i]
        r11 = R[k, 0]; r12 = R[k, 1]; r22 = R[k, 2]
        z1 = z[k, 0]; z2 = z[k, 1]
        # rotate (a, b | y) into row 1 of the factor
        if a != 0.0:
            r = sqrt(r11 * r11 + a * a)
            c = r11 / r
            s = a / r
            r11 = r
            t1 = c * r12 + s * b
            b = -s * r12 + c * b
            r12 = t1
            t1 = c * z1 + s * y
            y = -s * z1 + c * y
            z1 = t1
        # rotate the remainder into row 2
        if b != 0.0:
            r = sqrt(r22 * r22 + b * b)
            c = r22 / r
            s = b / r
            r22 = r
            t1 = c * z2 + s * y
            y = -s * z2 + c * y
            z2 = t1
        R[k, 0] = r11; R[k, 1] = r12; R[k, 2] = r22
        z[k, 0] = z1; z[k, 1] = z2
    return R, z, counts
