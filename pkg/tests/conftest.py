import numpy as np
import pytest

from qrls import kernels
from qrls.fem import ProblemSpec, assemble, spectral_bounds
from qrls.iterate import Scheme

ALL_CASES = [(1, "a"), (1, "b"), (2, "a"), (2, "b"), (2, "c")]


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    """Each available kernel implementation in turn."""
    return kernels.backends()[request.param]


def problem(dim, case, n):
    """Assembled ``(A, b, richardson_scheme)`` with ``n`` unknowns per dimension."""
    A, b = assemble(ProblemSpec.from_dofs(dim, case, n))
    return A, b, Scheme.richardson(spectral_bounds(A, "dense_exact"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[k])
