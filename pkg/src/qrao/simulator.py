"""Dense statevector simulation: preparation, rotations, Hamiltonian evolution,
reduced-state entropy and basis sampling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .pauli import EIGH_CAP, Hamiltonian, PauliAxis, PauliString, pauli_matrix, to_dense
from .rng import make_rng
from .statevector import StateVector

ENTROPY_CUTOFF = 1e-12


class SimulationError(ValueError):
    pass


class InitialState(str, enum.Enum):
    ZERO_ALL = "zero"
    PLUS_ALL = "plus"
    MINUS_I_ALL = "minus_i"


_SINGLE_QUBIT_INIT = {
    InitialState.ZERO_ALL: np.array([1.0, 0.0], dtype=np.complex128),
    InitialState.PLUS_ALL: np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2),
    InitialState.MINUS_I_ALL: np.array([1.0, -1j], dtype=np.complex128) / math.sqrt(2),
}

# maps the +1/-1 eigenvectors of each axis onto |0>/|1>
_MEASUREMENT_BASIS_CHANGE = {
    PauliAxis.Z: np.eye(2, dtype=np.complex128),
    PauliAxis.X: np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2),
    PauliAxis.Y: np.array([[1, -1j], [1, 1j]], dtype=np.complex128) / math.sqrt(2),
}


@dataclass(frozen=True)
class EvolutionMethod:
    """How ``exp(-i gamma H)`` is realized: ``exact``, ``trotter`` or ``grouped``."""

    kind: str = "exact"
    steps: int = 1

    def __post_init__(self):
        if self.kind not in ("exact", "trotter", "grouped"):
            raise SimulationError(f"unknown evolution method {self.kind!r}")
        if self.steps < 1:
            raise SimulationError(f"Trotter steps must be >= 1, got {self.steps}")

    @classmethod
    def exact(cls) -> "EvolutionMethod":
        return cls("exact", 1)

    @classmethod
    def trotter(cls, steps: int) -> "EvolutionMethod":
        return cls("trotter", steps)

    @classmethod
    def grouped(cls, steps: int) -> "EvolutionMethod":
        return cls("grouped", steps)

    @classmethod
    def parse(cls, text: str) -> "EvolutionMethod":
        """``"exact"``, ``"trotter:4"`` or ``"grouped:2"``."""
        kind, _, steps = text.partition(":")
        return cls(kind, int(steps) if steps else 1)

    def __str__(self) -> str:
        return "exact" if self.kind == "exact" else f"{self.kind}:{self.steps}"


def _check_register(psi: StateVector, n_qubits: int) -> None:
    if psi.n_qubits != n_qubits:
        raise SimulationError(f"state has {psi.n_qubits} qubits, operator acts on {n_qubits}")


def prepare_basis(n: int, which: InitialState | str) -> StateVector:
    single = _SINGLE_QUBIT_INIT[InitialState(which)]
    state = np.ones(1, dtype=np.complex128)
    for _ in range(n):
        state = np.kron(single, state)
    return StateVector(n, state)


@numba.njit(cache=True)
def _single_qubit_kernel(amps, gate, qubits):
    out = amps.copy()
    g00, g01, g10, g11 = gate[0, 0], gate[0, 1], gate[1, 0], gate[1, 1]
    for q in qubits:
        step = 1 << q
        for base in range(0, out.size, 2 * step):
            for k in range(base, base + step):
                a0 = out[k]
                a1 = out[k + step]
                out[k] = g00 * a0 + g01 * a1
                out[k + step] = g10 * a0 + g11 * a1
    return out


def apply_single_qubit(amps: np.ndarray, gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    if not 0 <= qubit < n:
        raise SimulationError(f"qubit {qubit} outside register of {n}")
    return _single_qubit_kernel(amps, np.asarray(gate, dtype=np.complex128), np.array([qubit], dtype=np.int64))


def apply_two_qubit(amps: np.ndarray, gate: np.ndarray, qa: int, qb: int, n: int) -> np.ndarray:
    """Apply a 4x4 ``gate`` whose local basis index is ``bit(qa) + 2 * bit(qb)``."""
    tensor = amps.reshape((2,) * n)
    axes = [n - 1 - qb, n - 1 - qa]
    moved = np.moveaxis(tensor, axes, [0, 1]).reshape(4, -1)
    out = (gate @ moved).reshape((2, 2) + tensor.shape[2:])
    return np.moveaxis(out, [0, 1], axes).reshape(-1)


def apply_mixer_layer(amps: np.ndarray, axis: PauliAxis, beta: float, n: int) -> np.ndarray:
    """``prod_q exp(-i beta P_q)``: the same rotation on every qubit."""
    gate = math.cos(beta) * np.eye(2) - 1j * math.sin(beta) * pauli_matrix(axis)
    return _single_qubit_kernel(amps, gate, np.arange(n, dtype=np.int64))


def _rotate(amps: np.ndarray, string: PauliString, theta: float) -> np.ndarray:
    return math.cos(theta) * amps - 1j * math.sin(theta) * string.apply(amps)


def apply_pauli_rotation(psi: StateVector, string: PauliString, theta: float) -> StateVector:
    """``exp(-i theta P) psi``, using ``P**2 = I``."""
    _check_register(psi, string.n_qubits)
    if theta == 0:
        return psi.copy()
    return StateVector(psi.n_qubits, _rotate(psi.amplitudes, string, theta))


def exact_propagate(amps: np.ndarray, h: Hamiltonian, gamma: float) -> np.ndarray:
    if h.n_qubits > EIGH_CAP:
        raise SimulationError(f"exact evolution limited to {EIGH_CAP} qubits, got {h.n_qubits}")
    evals, evecs = h.spectrum
    return evecs @ (np.exp(-1j * gamma * evals) * (evecs.conj().T @ amps))


def evolve_exact(psi: StateVector, h: Hamiltonian, gamma: float) -> StateVector:
    _check_register(psi, h.n_qubits)
    return StateVector(psi.n_qubits, exact_propagate(psi.amplitudes, h, gamma))


def trotter_propagate(amps: np.ndarray, h: Hamiltonian, gamma: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise SimulationError(f"Trotter steps must be >= 1, got {steps}")
    if h.is_diagonal():
        # all factors commute; the product is exactly the diagonal phase
        return np.exp(-1j * gamma * h.diagonal) * amps
    dt = gamma / steps
    rotations = [(math.cos(dt * c), math.sin(dt * c), s.x_mask, s.phase_diagonal()) for c, s in h.terms]
    idx = np.arange(amps.size)
    for _ in range(steps):
        for cos_t, sin_t, x_mask, phase in rotations:
            amps = cos_t * amps - 1j * sin_t * (phase * amps)[idx ^ x_mask]
    return amps


def evolve_trotter(psi: StateVector, h: Hamiltonian, gamma: float, steps: int) -> StateVector:
    """First-order product formula, terms in stored order, repeated ``steps`` times."""
    _check_register(psi, h.n_qubits)
    return StateVector(psi.n_qubits, trotter_propagate(psi.amplitudes, h, gamma, steps))


@dataclass(frozen=True)
class PairBlock:
    """All terms of a Hamiltonian supported on one qubit pair, as a 4x4 Hermitian block."""

    qubits: tuple[int, int]
    evals: np.ndarray
    evecs: np.ndarray

    def unitary(self, angle: float) -> np.ndarray:
        return (self.evecs * np.exp(-1j * angle * self.evals)) @ self.evecs.conj().T


def pair_blocks(h: Hamiltonian, groups=None) -> list[PairBlock]:
    """Group two-local terms by qubit pair; order is first appearance unless ``groups`` is given."""
    by_pair: dict[tuple[int, int], list[tuple[float, PauliString]]] = {}
    for coeff, string in h.terms:
        support = string.support
        if len(support) != 2:
            raise SimulationError(f"grouped Trotter needs two-local terms, got {string.label}")
        by_pair.setdefault(support, []).append((coeff, string))
    if groups is None:
        order = list(by_pair)
    else:
        order = [tuple(sorted(pair)) for pair in groups]
        if len(set(order)) != len(order):
            raise SimulationError("qubit-pair partition lists a pair twice")
        stray = set(by_pair) - set(order)
        if stray:
            raise SimulationError(f"terms on pairs {sorted(stray)} are not covered by the partition")
    blocks = []
    for lo, hi in order:
        local_terms = []
        for coeff, string in by_pair.get((lo, hi), []):
            local = {0 if q == lo else 1: a for q, a in string.factors}
            local_terms.append((coeff, PauliString(2, tuple(local.items()))))
        if not local_terms:
            continue
        evals, evecs = np.linalg.eigh(to_dense(Hamiltonian(2, tuple(local_terms))))
        blocks.append(PairBlock((lo, hi), evals, evecs))
    return blocks


def grouped_trotter_propagate(amps: np.ndarray, blocks: list[PairBlock], n: int, gamma: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise SimulationError(f"Trotter steps must be >= 1, got {steps}")
    dt = gamma / steps
    gates = [(b.unitary(dt), b.qubits) for b in blocks]
    for _ in range(steps):
        for gate, (lo, hi) in gates:
            amps = apply_two_qubit(amps, gate, lo, hi, n)
    return amps


def evolve_grouped_trotter(
    psi: StateVector, h: Hamiltonian, gamma: float, steps: int, groups=None
) -> StateVector:
    """Product formula whose factors are exact exponentials of each qubit pair's block."""
    _check_register(psi, h.n_qubits)
    blocks = pair_blocks(h, groups)
    return StateVector(psi.n_qubits, grouped_trotter_propagate(psi.amplitudes, blocks, h.n_qubits, gamma, steps))


def evolve(psi: StateVector, h: Hamiltonian, gamma: float, method: EvolutionMethod) -> StateVector:
    if method.kind == "exact":
        return evolve_exact(psi, h, gamma)
    if method.kind == "trotter":
        return evolve_trotter(psi, h, gamma, method.steps)
    return evolve_grouped_trotter(psi, h, gamma, method.steps)


def reduced_density_matrix(psi: StateVector, subset) -> np.ndarray:
    n = psi.n_qubits
    subset = sorted(set(int(q) for q in subset))
    if not subset or len(subset) >= n:
        raise SimulationError("subsystem must be a non-empty proper subset of the qubits")
    if subset[0] < 0 or subset[-1] >= n:
        raise SimulationError(f"subsystem {subset} outside register of {n}")
    tensor = psi.amplitudes.reshape((2,) * n)
    # reversed so that the first listed qubit is the least significant bit of rho_A
    axes = [n - 1 - q for q in reversed(subset)]
    mat = np.moveaxis(tensor, axes, range(len(subset))).reshape(1 << len(subset), -1)
    return mat @ mat.conj().T


def partial_trace_entropy(psi: StateVector, subset) -> float:
    """Von Neumann entropy (nats) of the reduced state on ``subset``."""
    evals = np.linalg.eigvalsh(reduced_density_matrix(psi, subset))
    evals = evals[evals > ENTROPY_CUTOFF]
    return float(-np.sum(evals * np.log(evals)))


def measurement_distribution(psi: StateVector, axes) -> np.ndarray:
    """Outcome probabilities when qubit ``q`` is measured along ``axes[q]``."""
    axes = [PauliAxis(a) for a in axes]
    if len(axes) != psi.n_qubits:
        raise SimulationError(f"need one axis per qubit ({psi.n_qubits}), got {len(axes)}")
    amps = psi.amplitudes
    for q, axis in enumerate(axes):
        if axis is not PauliAxis.Z:
            amps = apply_single_qubit(amps, _MEASUREMENT_BASIS_CHANGE[axis], q, psi.n_qubits)
    probs = np.abs(amps) ** 2
    return probs / probs.sum()


def sample_indices(psi: StateVector, axes, shots: int, seed: int) -> np.ndarray:
    """Histogram of measured basis indices, length ``2**n``."""
    if shots < 1:
        raise SimulationError(f"shots must be positive, got {shots}")
    probs = measurement_distribution(psi, axes)
    return make_rng(seed).multinomial(shots, probs)


def bitstring(index: int, n: int) -> str:
    """Qubit 0 is printed first."""
    return "".join(str((index >> q) & 1) for q in range(n))


def sample_in_axis(psi: StateVector, axes, shots: int, seed: int) -> dict[str, int]:
    counts = sample_indices(psi, axes, shots, seed)
    return {bitstring(i, psi.n_qubits): int(c) for i, c in enumerate(counts) if c}

