# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: CSR products, relaxation sweeps and matrix Clenshaw."""
import numpy as np
cimport numpy as np

from libc.math cimport sqrt
from libc.stdint cimport int64_t

np.import_array()


cdef inline void _matvec(const int64_t[::1] indptr, const int64_t[::1] indices,
                         const double[::1] data, const double* x,
                         double* out, double scale) noexcept nogil:
    cdef Py_ssize_t i, k, n = indptr.shape[0] - 1
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = scale * acc


def csr_matvec(const int64_t[::1] indptr, const int64_t[::1] indices,
               const double[::1] data, const double[::1] x):
    out = np.empty(indptr.shape[0] - 1, dtype=np.float64)
    cdef double[::1] o = out
    if o.shape[0] == 0:
        return out
    with nogil:
        _matvec(indptr, indices, data, &x[0], &o[0], 1.0)
    return out


def relaxation_run(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const double[::1] data, const double[::1] cinv,
                   const double[::1] b, const double[::1] x0,
                   const double[::1] taus, x_exact=None, bint store=False):
    """Run x <- x - tau_k * cinv * (A x - b) for every tau in ``taus``."""
    cdef Py_ssize_t n = x0.shape[0], steps = taus.shape[0]
    cdef Py_ssize_t i, k
    cdef bint track = x_exact is not None
    cdef double[::1] xe
    cdef double acc, tau, err, d

    x_arr = np.array(x0, dtype=np.float64, copy=True)
    r_arr = np.empty(n, dtype=np.float64)
    errors = np.empty(steps + 1 if track else 0, dtype=np.float64)
    iterates = np.empty((steps + 1 if store else 0, n), dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] r = r_arr
    cdef double[::1] e = errors
    cdef double[:, ::1] it = iterates
    if track:
        xe = np.ascontiguousarray(x_exact, dtype=np.float64)

    with nogil:
        if store:
            for i in range(n):
                it[0, i] = x[i]
        if track:
            err = 0.0
            for i in range(n):
                d = x[i] - xe[i]
                err += d * d
            e[0] = sqrt(err)
        for k in range(steps):
            tau = taus[k]
            _matvec(indptr, indices, data, &x[0], &r[0], 1.0)
            for i in range(n):
                x[i] = x[i] - tau * cinv[i] * (r[i] - b[i])
            if store:
                for i in range(n):
                    it[k + 1, i] = x[i]
            if track:
                err = 0.0
                for i in range(n):
                    d = x[i] - xe[i]
                    err += d * d
                e[k + 1] = sqrt(err)
    return x_arr, errors, (iterates if store else None)


def chebyshev_matvec(const int64_t[::1] indptr, const int64_t[::1] indices,
                     const double[::1] data, const double[::1] coeffs,
                     const double[::1] v, double scale):
    """Return sum_k coeffs[k] T_k(scale * A) v by the Clenshaw recurrence."""
    cdef Py_ssize_t n = v.shape[0], deg = coeffs.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double ck

    out = np.zeros(n, dtype=np.float64)
    if deg < 0:
        return out
    b1_arr = np.zeros(n, dtype=np.float64)
    b2_arr = np.zeros(n, dtype=np.float64)
    t_arr = np.empty(n, dtype=np.float64)
    cdef double* b1 = <double*> np.PyArray_DATA(b1_arr)
    cdef double* b2 = <double*> np.PyArray_DATA(b2_arr)
    cdef double* t = <double*> np.PyArray_DATA(t_arr)
    cdef double* o = <double*> np.PyArray_DATA(out)
    cdef double* swap

    with nogil:
        for k in range(deg, 0, -1):
            ck = coeffs[k]
            _matvec(indptr, indices, data, b1, t, scale)
            # b_k = 2 X b_{k+1} - b_{k+2} + c_k v, written over b_{k+2}
            for i in range(n):
                b2[i] = 2.0 * t[i] - b2[i] + ck * v[i]
            swap = b1
            b1 = b2
            b2 = swap
        _matvec(indptr, indices, data, b1, t, scale)
        ck = coeffs[0]
        for i in range(n):
            o[i] = t[i] - b2[i] + ck * v[i]
    return out


def chebyshev_eval(const double[::1] coeffs, const double[::1] x):
    """Evaluate a Chebyshev series at each point of ``x``."""
    cdef Py_ssize_t m = x.shape[0], deg = coeffs.shape[0] - 1
    cdef Py_ssize_t j, k, lane
    cdef double ck
    # four points advance together so the recurrences overlap in the pipeline
    cdef double xx[4]
    cdef double b1[4]
    cdef double b2[4]
    cdef double bk
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] o = out
    if deg < 0:
        return out
    with nogil:
        for j in range(0, m, 4):
            for lane in range(4):
                xx[lane] = 2.0 * x[j + lane] if j + lane < m else 0.0
                b1[lane] = 0.0
                b2[lane] = 0.0
            for k in range(deg, 0, -1):
                ck = coeffs[k]
                for lane in range(4):
                    bk = xx[lane] * b1[lane] - b2[lane] + ck
                    b2[lane] = b1[lane]
                    b1[lane] = bk
            for lane in range(4):
                if j + lane < m:
                    o[j + lane] = 0.5 * xx[lane] * b1[lane] - b2[lane] + coeffs[0]
    return out
