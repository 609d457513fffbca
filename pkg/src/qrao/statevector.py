from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-8


class StateError(ValueError):
    pass


@dataclass
class StateVector:
    """Dense amplitudes of an ``n_qubits`` pure state.

    Qubit 0 is the least significant bit of the basis index.
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.n_qubits < 1:
            raise StateError("a state needs at least one qubit")
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise StateError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise StateError(f"state is not normalized (norm {self.norm():.12g})")

    @classmethod
    def from_array(cls, amplitudes) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        n = int(amplitudes.size).bit_length() - 1
        return cls(n, amplitudes)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def to_bytes(self) -> bytes:
        """Little-endian dump: uint64 qubit count, then (real, imag) float64 pairs."""
        header = np.array([self.n_qubits], dtype="<u8").tobytes()
        body = self.amplitudes.astype("<c16").view("<f8").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "StateVector":
        n = int(np.frombuffer(data[:8], dtype="<u8")[0])
        pairs = np.frombuffer(data[8:], dtype="<f8")
        return cls(n, pairs[0::2] + 1j * pairs[1::2])
