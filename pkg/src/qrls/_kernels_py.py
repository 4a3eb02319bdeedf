"""Numpy implementations of the kernels in ``_kernels.pyx``.

Same signatures and same floating-point operation order per entry, so the two
backends agree to rounding.
"""
import numpy as np


def _row_ids(indptr):
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def _matvec(rows, indices, data, x, n, scale=1.0):
    # bincount returns integers when there are no entries at all
    out = np.bincount(rows, weights=data * x[indices], minlength=n).astype(np.float64, copy=False)
    if scale != 1.0:
        out *= scale
    return out


def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    return _matvec(_row_ids(indptr), indices, data, np.asarray(x, dtype=np.float64), n)


def relaxation_run(indptr, indices, data, cinv, b, x0, taus, x_exact=None, store=False):
    n = x0.shape[0]
    rows = _row_ids(indptr)
    x = np.array(x0, dtype=np.float64, copy=True)
    steps = len(taus)
    errors = np.empty(steps + 1 if x_exact is not None else 0)
    iterates = np.empty((steps + 1, n)) if store else None
    if store:
        iterates[0] = x
    if x_exact is not None:
        errors[0] = np.linalg.norm(x - x_exact)
    for k, tau in enumerate(taus):
        r = _matvec(rows, indices, data, x, n)
        x = x - tau * cinv * (r - b)
        if store:
            iterates[k + 1] = x
        if x_exact is not None:
            errors[k + 1] = np.linalg.norm(x - x_exact)
    return x, errors, iterates


def chebyshev_matvec(indptr, indices, data, coeffs, v, scale):
    n = v.shape[0]
    deg = len(coeffs) - 1
    if deg < 0:
        return np.zeros(n)
    rows = _row_ids(indptr)
    b1 = np.zeros(n)
    b2 = np.zeros(n)
    for k in range(deg, 0, -1):
        t = _matvec(rows, indices, data, b1, n, scale)
        b1, b2 = 2.0 * t - b2 + coeffs[k] * v, b1
    t = _matvec(rows, indices, data, b1, n, scale)
    return t - b2 + coeffs[0] * v


def chebyshev_eval(coeffs, x):
    x = np.asarray(x, dtype=np.float64)
    deg = len(coeffs) - 1
    if deg < 0:
        return np.zeros_like(x)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(deg, 0, -1):
        b1, b2 = 2.0 * x * b1 - b2 + coeffs[k], b1
    return x * b1 - b2 + coeffs[0]
