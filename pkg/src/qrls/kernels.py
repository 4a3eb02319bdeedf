"""Backend selection for the numerical hot loops.

The compiled extension ``qrls._kernels`` is used when it was built; otherwise
the numpy module ``qrls._kernels_py`` provides the same functions. Setting the
environment variable ``QRLS_PURE_PYTHON=1`` forces the fallback.

Functions
---------
csr_matvec(indptr, indices, data, x)
relaxation_run(indptr, indices, data, cinv, b, x0, taus, x_exact=None, store=False)
chebyshev_matvec(indptr, indices, data, coeffs, v, scale)
chebyshev_eval(coeffs, x)
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("QRLS_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

csr_matvec = _impl.csr_matvec
relaxation_run = _impl.relaxation_run
chebyshev_matvec = _impl.chebyshev_matvec
chebyshev_eval = _impl.chebyshev_eval


def backends():
    """Available backend modules keyed by name."""
    found = {"python": python_backend}
    if compiled_backend is not None:
        found["cython"] = compiled_backend
    return found
