# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled reservoir time-stepping kernels.

Arithmetic order is fixed and shared with ``_pykernels``: the recurrent
sum runs over ascending column index starting from 0.0, the input sum
over ascending feature index starting from 0.0, and the pre-activation is
``recurrent + input``.  Both backends are therefore bit-identical.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, floor

cnp.import_array()


cdef inline double _activate(double X, double i0, bint quantise, double phase_step,
                             double in_levels, const double[::1] table) noexcept nogil:
    cdef double k, level, s
    if quantise:
        k = floor(X / phase_step + 0.5)
        level = k - in_levels * floor(k / in_levels)
        return table[<Py_ssize_t>level]
    s = sin(X)
    return i0 * (s * s)


def run_dense(const double[:, ::1] W, const double[:, ::1] b, const double[:, ::1] inputs,
              const double[::1] x0, double i0, bint quantise, double phase_step,
              long in_levels, const double[::1] table):
    cdef Py_ssize_t N = W.shape[0], K = b.shape[1], T = inputs.shape[0]
    cdef Py_ssize_t t, i, j, k
    cdef double rec, inp
    cdef double lv = <double>in_levels
    out_arr = np.empty((T, N), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    with nogil:
        for t in range(T):
            for i in range(N):
                rec = 0.0
                for j in range(N):
                    rec = rec + W[i, j] * x[j]
                inp = 0.0
                for k in range(K):
                    inp = inp + b[i, k] * inputs[t, k]
                out[t, i] = _activate(rec + inp, i0, quantise, phase_step, lv, table)
            for i in range(N):
                x[i] = out[t, i]
    return out_arr


def run_csr(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
            const double[::1] data, const double[:, ::1] b, const double[:, ::1] inputs,
            const double[::1] x0, double i0, bint quantise, double phase_step,
            long in_levels, const double[::1] table):
    cdef Py_ssize_t N = indptr.shape[0] - 1, K = b.shape[1], T = inputs.shape[0]
    cdef Py_ssize_t t, i, m, k
    cdef double rec, inp
    cdef double lv = <double>in_levels
    out_arr = np.empty((T, N), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    with nogil:
        for t in range(T):
            for i in range(N):
                rec = 0.0
                for m in range(indptr[i], indptr[i + 1]):
                    rec = rec + data[m] * x[indices[m]]
                inp = 0.0
                for k in range(K):
                    inp = inp + b[i, k] * inputs[t, k]
                out[t, i] = _activate(rec + inp, i0, quantise, phase_step, lv, table)
            for i in range(N):
                x[i] = out[t, i]
    return out_arr
