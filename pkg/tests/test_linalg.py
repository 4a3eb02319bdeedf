from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qrls.linalg import (DimensionError, SingularMatrixError, SizeCapError, SparseMatrix,
                         dense_singular_bounds, dense_solve, hermitian_dilation, read_matrix_market,
                         read_vector, spmv, write_matrix_market, write_vector)

DATA = Path(__file__).parent / "data"


def test_triplets_sum_duplicates_and_drop_zeros():
    A = SparseMatrix.from_triplets([0, 0, 1, 1, 1], [1, 1, 0, 0, 1], [1.0, 2.0, 5.0, -5.0, 4.0],
                                   (2, 2))
    np.testing.assert_array_equal(A.to_dense(), [[0, 3], [0, 4]])
    assert A.nnz == 2
    np.testing.assert_array_equal(A.row_offsets, [0, 1, 2])


def test_degree_is_max_row_or_column_count():
    A = SparseMatrix.from_dense([[1, 0, 0], [1, 0, 0], [1, 1, 1]])
    assert A.d == 3


def test_arrays_are_read_only():
    A = SparseMatrix.identity(3)
    with pytest.raises(ValueError):
        A.values[0] = 2.0


def test_transpose_and_symmetry():
    A = SparseMatrix.from_dense([[1, 2], [0, 3]])
    np.testing.assert_array_equal(A.T.to_dense(), [[1, 0], [2, 3]])
    assert not A.is_symmetric()
    assert SparseMatrix.from_dense([[2, -1], [-1, 2]]).is_symmetric()


def test_spmv_dimension_error():
    with pytest.raises(DimensionError):
        spmv(SparseMatrix.identity(3), np.ones(4))


def test_size_cap():
    A = SparseMatrix.identity(10)
    with pytest.raises(SizeCapError):
        A.to_dense(cap=5)
    with pytest.raises(SizeCapError):
        dense_singular_bounds(A, cap=5)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
              elements=st.sampled_from([0.0, 0.0, 1.0, -2.5, 1e-300, 3e8])))
def test_dense_round_trip(a):
    A = SparseMatrix.from_dense(a)
    np.testing.assert_array_equal(A.to_dense(), a)
    x = np.linspace(-1, 1, a.shape[1])
    np.testing.assert_allclose(A @ x, a @ x, rtol=1e-12, atol=1e-12 * np.abs(a).sum())


def test_dilation_spectrum_is_plus_minus_singular_values(rng):
    m = rng.standard_normal((5, 5))
    H = hermitian_dilation(SparseMatrix.from_dense(m)).to_dense()
    assert np.array_equal(H, H.T)
    s = np.linalg.svd(m, compute_uv=False)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(H)), np.sort(np.concatenate([s, -s])),
                               atol=1e-12)


def test_singular_bounds(rng):
    m = rng.standard_normal((6, 6))
    smin, smax = dense_singular_bounds(SparseMatrix.from_dense(m))
    s = np.linalg.svd(m, compute_uv=False)
    assert smin == pytest.approx(s.min(), rel=1e-12) and smax == pytest.approx(s.max(), rel=1e-12)


@pytest.mark.parametrize("lower", [True, False])
def test_dense_solve(lower, rng):
    m = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    if lower:
        m = np.tril(m)
    b = rng.standard_normal(8)
    x = dense_solve(SparseMatrix.from_dense(m), b)
    np.testing.assert_allclose(m @ x, b, atol=1e-12)


def test_dense_solve_singular():
    with pytest.raises(SingularMatrixError):
        dense_solve(SparseMatrix.from_dense([[1, 1], [1, 1]]), np.ones(2))


def test_matrix_market_golden():
    A = read_matrix_market(DATA / "golden_general.mtx")
    np.testing.assert_array_equal(A.to_dense(), [[2, 0, -1], [0, 3, 0], [4, 0, 5]])
    S = read_matrix_market(DATA / "golden_symmetric.mtx")
    np.testing.assert_array_equal(S.to_dense(), [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])


def test_matrix_market_round_trip(tmp_path, rng):
    dense = rng.standard_normal((7, 5)) * (rng.random((7, 5)) < 0.4)
    A = SparseMatrix.from_dense(dense)
    write_matrix_market(tmp_path / "a.mtx", A, comments=["written by a test"])
    B = read_matrix_market(tmp_path / "a.mtx")
    assert B == A
    np.testing.assert_array_equal(B.to_dense(), dense)


def test_golden_write_is_stable(tmp_path):
    A = read_matrix_market(DATA / "golden_general.mtx")
    write_matrix_market(tmp_path / "g.mtx", A)
    assert read_matrix_market(tmp_path / "g.mtx") == A
    text = (tmp_path / "g.mtx").read_text()
    assert text.startswith("%%MatrixMarket matrix coordinate real general")
    assert "\r" not in text


def test_vector_round_trip(tmp_path, rng):
    x = rng.standard_normal(11)
    write_vector(tmp_path / "x.mtx", x)
    np.testing.assert_array_equal(read_vector(tmp_path / "x.mtx"), x)
