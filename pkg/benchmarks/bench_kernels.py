"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from qrls import kernels
from qrls.blocksys import build_block_system
from qrls.fem import ProblemSpec, assemble, spectral_bounds
from qrls.iterate import Scheme
from qrls.linalg import hermitian_dilation
from qrls.qlsa import build_inverse_poly, certification_grid


def workloads():
    A, b = assemble(ProblemSpec.from_dofs(2, "a", 64))
    sb = spectral_bounds(A, "gershgorin", lower=1e-3)
    args = (A.row_offsets, A.col_indices, A.values)
    x = np.linspace(0, 1, A.n_rows)
    taus = np.full(500, 2 / (sb.a + sb.b))
    cinv = np.ones(A.n_rows)

    A16, b16 = assemble(ProblemSpec.from_dofs(2, "b", 16))
    sys_ = build_block_system(A16, b16, np.zeros(A16.n_rows),
                              Scheme.richardson(spectral_bounds(A16, "dense_exact")), 4)
    D = hermitian_dilation(sys_.M)
    poly = build_inverse_poly(16.0, 1.25e-10)
    v = np.zeros(D.n_rows)
    v[:sys_.M.n_rows] = sys_.y / np.linalg.norm(sys_.y)
    grid = certification_grid(50.0)
    coeffs = build_inverse_poly(50.0, 1e-9).coefficients

    return {
        f"csr_matvec (2D, N={A.n_rows})":
            lambda m: m.csr_matvec(*args, x),
        f"relaxation_run (500 steps, N={A.n_rows})":
            lambda m: m.relaxation_run(*args, cinv, b, x, taus, None, False),
        f"chebyshev_matvec (degree {poly.degree}, rows {D.n_rows})":
            lambda m: m.chebyshev_matvec(D.row_offsets, D.col_indices, D.values,
                                         poly.coefficients, v, 0.5),
        f"chebyshev_eval (degree {coeffs.size - 1}, {grid.size} points)":
            lambda m: m.chebyshev_eval(coeffs, grid),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.backends()
    print(f"default backend: {kernels.BACKEND}")
    names = sorted(backends)
    print(f"{'kernel':<52}" + "".join(f"{n + ' [ms]':>16}" for n in names) + f"{'speedup':>10}")
    for label, fn in workloads().items():
        times = {}
        for name in names:
            mod = backends[name]
            number = 3
            times[name] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        line = f"{label:<52}" + "".join(f"{times[n] * 1e3:>16.3f}" for n in names)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
