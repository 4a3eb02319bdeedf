"""Classical emulation of quantum relaxation for linear systems.

Relaxation steps for ``A x = b`` are stacked into one block lower-bidiagonal
system whose condition number depends only on the number of steps. Solving that
system with an emulated polynomial linear-system solver and measuring the
iteration index returns a late iterate with known probability.
"""
__version__ = "0.1.0"

from .kernels import BACKEND
from .linalg import SparseMatrix, dense_solve, spmv
from .fem import ProblemSpec, SpectralBounds, assemble, spectral_bounds
from .iterate import Scheme, run_iterations
from .blocksys import BlockSystem, build_block_system, verify_block_bounds
from .state import StateVector
from .qlsa import apply_qlsa, build_inverse_poly, exact_oracle
from .measure import register_probabilities, run_qrls

__all__ = ["BACKEND", "SparseMatrix", "dense_solve", "spmv", "ProblemSpec", "SpectralBounds",
           "assemble", "spectral_bounds", "Scheme", "run_iterations", "BlockSystem",
           "build_block_system", "verify_block_bounds", "StateVector", "apply_qlsa",
           "build_inverse_poly", "exact_oracle", "register_probabilities", "run_qrls"]
