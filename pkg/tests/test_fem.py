import numpy as np
import pytest

from qrls.fem import (ProblemError, ProblemSpec, analytic_spectrum, assemble, dof_coordinates,
                      exact_solution_1d, periodic_laplacian_1d, spectral_bounds)
from qrls.linalg import SparseMatrix, dense_solve

from conftest import ALL_CASES


@pytest.mark.parametrize("dim,case", ALL_CASES)
@pytest.mark.parametrize("k", [2, 3, 8])
def test_unknown_count_and_symmetry(dim, case, k):
    A, b = assemble(ProblemSpec.from_dofs(dim, case, k))
    assert A.shape == (k ** dim, k ** dim)
    assert b.shape == (k ** dim,)
    assert A.is_symmetric()
    assert np.all(np.linalg.eigvalsh(A.to_dense()) > 0)


def test_1d_dirichlet_stencil():
    A, b = assemble(ProblemSpec(1, "a", 6))
    expected = 2 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1)
    np.testing.assert_array_equal(A.to_dense(), expected)
    np.testing.assert_allclose(b, np.full(4, 0.2 ** 2))


def test_1d_free_end_stencil():
    A, b = assemble(ProblemSpec(1, "b", 5))
    np.testing.assert_array_equal(A.to_dense()[-1], [0, 0, -1, 1])
    h = 0.25
    np.testing.assert_allclose(b, [h * h, h * h, h * h, h * h / 2])


@pytest.mark.parametrize("case", ["a", "b"])
@pytest.mark.parametrize("n", [3, 7, 33])
def test_1d_nodal_exactness(case, n):
    # linear elements reproduce the quadratic solution at the nodes
    spec = ProblemSpec(1, case, n, length=2.0)
    A, b = assemble(spec)
    np.testing.assert_allclose(dense_solve(A, b), exact_solution_1d(spec), rtol=1e-10)


def test_2d_stencil_weights():
    A, b = assemble(ProblemSpec(2, "b", 3))
    np.testing.assert_array_equal(A.diagonal(), [4, 2, 2, 1])
    np.testing.assert_allclose(b, [0.25, 0.125, 0.125, 0.0625])


@pytest.mark.parametrize("case", ["a", "b", "c"])
def test_2d_row_sums_vanish_away_from_dirichlet(case):
    spec = ProblemSpec.from_dofs(2, case, 5)
    A, _ = assemble(spec)
    xy = dof_coordinates(spec)
    h = spec.h
    sums = A.to_dense().sum(axis=1)
    # rows not adjacent to a removed node keep the Neumann/interior zero row sum
    near = np.zeros(len(xy), dtype=bool)
    near |= np.isclose(xy[:, 0], h)
    if case in ("a", "b"):
        near |= np.isclose(xy[:, 1], h)
    if case == "a":
        near |= np.isclose(xy[:, 0], spec.length - h)
    np.testing.assert_allclose(sums[~near], 0, atol=1e-14)
    assert np.all(sums[near] > 0)


@pytest.mark.parametrize("dim,case", [(1, "a"), (1, "b")])
@pytest.mark.parametrize("k", [2, 3, 9, 40])
def test_analytic_spectrum(dim, case, k):
    A, _ = assemble(ProblemSpec.from_dofs(dim, case, k))
    np.testing.assert_allclose(analytic_spectrum(A), np.linalg.eigvalsh(A.to_dense()), atol=1e-12)


def test_analytic_spectrum_refuses_2d():
    A, _ = assemble(ProblemSpec.from_dofs(2, "a", 3))
    with pytest.raises(ProblemError):
        analytic_spectrum(A)


@pytest.mark.parametrize("dim,case", ALL_CASES)
def test_bounds_methods_consistent(dim, case):
    A, _ = assemble(ProblemSpec.from_dofs(dim, case, 6))
    exact = spectral_bounds(A, "dense_exact")
    gersh = spectral_bounds(A, "gershgorin", lower=exact.a)
    assert gersh.b >= exact.b
    assert gersh.kappa >= exact.kappa


def test_periodic_laplacian_null_space():
    P = periodic_laplacian_1d(8)
    np.testing.assert_allclose(P @ np.ones(8), 0)
    sb = spectral_bounds(P, "dense_exact")
    assert sb.a == pytest.approx(2 - 2 * np.cos(2 * np.pi / 8))
    assert sb.b == pytest.approx(4.0)


@pytest.mark.parametrize("kwargs", [dict(dim=3, case_label="a", n_nodes_per_dim=4),
                                    dict(dim=1, case_label="c", n_nodes_per_dim=4),
                                    dict(dim=1, case_label="a", n_nodes_per_dim=2),
                                    dict(dim=1, case_label="a", n_nodes_per_dim=5, length=-1)])
def test_invalid_problem(kwargs):
    with pytest.raises(ProblemError):
        ProblemSpec(**kwargs)


def test_labels_and_spacing():
    spec = ProblemSpec.from_dofs(1, "b", 4)
    assert spec.label == "1db"
    assert spec.h == pytest.approx(0.25)
