import numpy as np
import pytest

from qrls.blocksys import (BoundsReport, BoundViolation, ContractionError, build_block_matrix,
                           build_block_system, build_rhs, read_block_system,
                           spectral_block_singular_values, verify_block_bounds,
                           verify_block_bounds_spectral, write_block_system)
from qrls.fem import SpectralBounds
from qrls.iterate import Scheme, run_iterations
from qrls.linalg import SparseMatrix, dense_solve

from conftest import ALL_CASES, problem


def test_structure_of_small_block_matrix():
    A = SparseMatrix.from_dense([[2.0]])
    M = build_block_matrix(A, Scheme("identity", (0.25,)), l=2, c=1)
    expected = [[1, 0, 0, 0],
                [-0.5, 1, 0, 0],
                [0, -0.5, 1, 0],
                [0, 0, -1, 1]]
    np.testing.assert_allclose(M.to_dense(), expected)


def test_rhs_layout():
    y, norm = build_rhs(np.array([1.0, 2.0]), np.array([3.0, 4.0]), 0.5, 2, 1)
    np.testing.assert_array_equal(y, [3, 4, 0.5, 1, 0.5, 1, 0, 0])
    assert norm == pytest.approx(np.linalg.norm(y))


@pytest.mark.parametrize("dim,case", ALL_CASES)
@pytest.mark.parametrize("l", [1, 3])
def test_forward_substitution_reproduces_iterates(dim, case, l, rng):
    A, b, scheme = problem(dim, case, 4)
    x_in = rng.standard_normal(A.n_rows)
    sys_ = build_block_system(A, b, x_in, scheme, l)
    x = sys_.blocks(dense_solve(sys_.M, sys_.y))
    traj = run_iterations(A, b, x_in, scheme, l)
    np.testing.assert_allclose(x[:l + 1], traj.iterates, rtol=1e-12, atol=1e-14)
    for j in sys_.success_blocks:
        np.testing.assert_array_equal(x[j], x[l])


def test_block_bounds_example_1da_n4():
    A, b, scheme = problem(1, "a", 4)
    M = build_block_matrix(A, scheme, 4, 3)
    rep = verify_block_bounds(M, 4, 3)
    assert rep.ok and rep.kappa_M <= 16
    A16, _, scheme16 = problem(1, "a", 16)
    rep16 = verify_block_bounds(build_block_matrix(A16, scheme16, 4, 3), 4, 3)
    assert rep16.kappa_M <= 16
    assert max(rep.kappa_M, rep16.kappa_M) / min(rep.kappa_M, rep16.kappa_M) < 2
    assert scheme16.bounds.kappa / scheme.bounds.kappa > 4


def test_zero_iteration_matrix():
    A = SparseMatrix.identity(3)
    scheme = Scheme("identity", (1.0,))
    # R = 0 decouples the steps; only the copy coupling remains
    assert build_block_matrix(A, scheme, 1, 0) == SparseMatrix.identity(6)
    rep = verify_block_bounds(build_block_matrix(A, scheme, 1, 1), 1, 1)
    assert rep.norm_M == pytest.approx((1 + 5 ** 0.5) / 2)


@pytest.mark.parametrize("dim,case", ALL_CASES)
@pytest.mark.parametrize("l,c", [(2, 1), (3, 0), (2, 5)])
def test_spectral_route_matches_dense(dim, case, l, c):
    A, b, scheme = problem(dim, case, 4)
    M = build_block_matrix(A, scheme, l, c)
    dense = np.sort(np.linalg.svd(M.to_dense(), compute_uv=False))
    spectral = np.sort(spectral_block_singular_values(A, scheme.step_taus(l), l, c))
    np.testing.assert_allclose(spectral, dense, rtol=1e-11, atol=1e-13)
    rep_d = verify_block_bounds(M, l, c)
    rep_s = verify_block_bounds_spectral(A, scheme, l, c)
    assert rep_s.kappa_M == pytest.approx(rep_d.kappa_M, rel=1e-10)


@pytest.mark.slow
def test_spectral_route_matches_dense_at_cap():
    A, b, scheme = problem(2, "a", 16)
    M = build_block_matrix(A, scheme, 8, 7)
    assert M.n_rows == 4096
    rep_d = verify_block_bounds(M, 8, 7)
    rep_s = verify_block_bounds_spectral(A, scheme, 8, 7)
    assert rep_s.norm_M == pytest.approx(rep_d.norm_M, rel=1e-10)
    assert rep_s.norm_M_inv == pytest.approx(rep_d.norm_M_inv, rel=1e-8)


def test_contraction_refused_for_large_step():
    A, b, _ = problem(1, "a", 6)
    with pytest.raises(ContractionError):
        build_block_matrix(A, Scheme("identity", (0.6,)), 2, 1)


def test_nonsymmetric_identity_refused():
    A = SparseMatrix.from_dense([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ContractionError):
        build_block_matrix(A, Scheme("identity", (0.5,)), 1, 0)


def test_chebyshev_blocks_need_opt_out():
    A, b, scheme = problem(1, "a", 6)
    cheb = Scheme.chebyshev(scheme.bounds, 4)
    with pytest.raises(ContractionError):
        build_block_matrix(A, cheb, 4, 3)
    M = build_block_matrix(A, cheb, 4, 3, check_contraction=False)
    assert M.shape == (48, 48)


def test_jacobi_blocks_certified():
    A, b, _ = problem(2, "c", 3)
    bounds = SpectralBounds(0.05, 2.0, "analytic")
    # D^-1 A is not symmetric, so the optimal step is not a 2-norm contraction here
    with pytest.raises(ContractionError):
        build_block_system(A, b, np.zeros(9), Scheme.jacobi(bounds), 3)
    scheme = Scheme.jacobi(bounds, omega=0.5)
    sys_ = build_block_system(A, b, np.zeros(9), scheme, 3)
    x = sys_.blocks(dense_solve(sys_.M, sys_.y))
    traj = run_iterations(A, b, np.zeros(9), scheme, 3)
    np.testing.assert_allclose(x[3], traj.final, rtol=1e-12)


def test_report_flags_violations():
    rep = BoundsReport(2, 1, 2.5, 3.0)
    assert not rep.ok
    assert any("||M||" in v for v in rep.violations())
    with pytest.raises(BoundViolation):
        verify_block_bounds(SparseMatrix.from_dense(np.diag([3.0, 1.0])), 1, 0)


def test_block_system_files_round_trip(tmp_path):
    A, b, scheme = problem(1, "b", 4)
    sys_ = build_block_system(A, b, np.zeros(4), scheme, 3)
    write_block_system(tmp_path, sys_, "case")
    M, y, meta = read_block_system(tmp_path, "case")
    assert M == sys_.M
    np.testing.assert_array_equal(y, sys_.y)
    assert meta["l"] == 3 and meta["c"] == 2 and meta["N"] == 4
    assert meta["tau"] == (sys_.tau,)


def test_qubit_counts():
    A, b, scheme = problem(1, "a", 16)
    sys_ = build_block_system(A, b, np.zeros(16), scheme, 4)
    assert sys_.qubits() == (3, 4)
