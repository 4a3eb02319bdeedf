"""Amplitude-encoded register state ``sum_i |i>|x_i>``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-9


class StateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm real amplitudes split into ``n_blocks`` blocks of ``block_size``."""

    amplitudes: np.ndarray
    block_size: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.float64)
        if amps.ndim != 1 or self.block_size < 1 or amps.size % self.block_size:
            raise StateError(f"{amps.size} amplitudes do not split into blocks of {self.block_size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state norm is {norm!r}, expected 1")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, vec, block_size: int) -> StateVector:
        vec = np.asarray(vec, dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(vec / norm, block_size)

    @property
    def n_blocks(self) -> int:
        return self.amplitudes.size // self.block_size

    def blocks(self) -> np.ndarray:
        return self.amplitudes.reshape(self.n_blocks, self.block_size)

    def block(self, i: int) -> np.ndarray:
        return self.blocks()[i]

    def block_norms(self) -> np.ndarray:
        return np.linalg.norm(self.blocks(), axis=1)

    def distance(self, other: StateVector) -> float:
        return float(np.linalg.norm(self.amplitudes - other.amplitudes))

    def __len__(self):
        return self.amplitudes.size
