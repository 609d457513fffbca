"""Pauli strings and real-weighted Pauli-sum Hamiltonians.

A string acts on a basis state ``|b>`` as ``i**n_y * (-1)**popcount(b & z_mask) |b ^ x_mask>``
where ``x_mask`` marks X/Y factors and ``z_mask`` marks Z/Y factors. Everything
below (dense assembly, matrix-free products, expectations) is built on that rule.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .statevector import NORM_TOL, StateVector

DENSE_CAP = 14
EIGH_CAP = 12
ITERATIVE_TOL = 1e-8


class PauliError(ValueError):
    pass


class PauliAxis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


_PAULI_MATRICES = {
    PauliAxis.X: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    PauliAxis.Y: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    PauliAxis.Z: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


_I_POWERS = (1, 1j, -1, -1j)


def pauli_matrix(axis: PauliAxis | str) -> np.ndarray:
    return _PAULI_MATRICES[PauliAxis(axis)].copy()


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; qubits not listed carry the identity."""

    n_qubits: int
    factors: tuple[tuple[int, PauliAxis], ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise PauliError("n_qubits must be positive")
        items = dict(self.factors) if not isinstance(self.factors, dict) else self.factors
        if len(items) != len(self.factors):
            raise PauliError(f"repeated qubit in {self.factors}")
        norm = []
        for q, axis in sorted(items.items()):
            if not 0 <= q < self.n_qubits:
                raise PauliError(f"qubit {q} outside register of {self.n_qubits}")
            norm.append((int(q), PauliAxis(axis)))
        object.__setattr__(self, "factors", tuple(norm))

    @classmethod
    def from_dict(cls, n_qubits: int, factors: dict[int, PauliAxis | str]) -> "PauliString":
        return cls(n_qubits, tuple(factors.items()))

    @classmethod
    def parse(cls, label: str, n_qubits: int) -> "PauliString":
        """Parse ``"X0*Y1"``; ``"I"`` is the identity."""
        label = label.strip()
        if label in ("", "I"):
            return cls(n_qubits)
        factors = []
        for token in label.split("*"):
            m = re.fullmatch(r"([XYZ])(\d+)", token.strip())
            if m is None:
                raise PauliError(f"cannot parse Pauli factor {token!r}")
            factors.append((int(m.group(2)), PauliAxis(m.group(1))))
        return cls(n_qubits, tuple(factors))

    @property
    def label(self) -> str:
        if not self.factors:
            return "I"
        return "*".join(f"{axis.value}{q}" for q, axis in self.factors)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    @property
    def x_mask(self) -> int:
        return sum(1 << q for q, a in self.factors if a in (PauliAxis.X, PauliAxis.Y))

    @property
    def z_mask(self) -> int:
        return sum(1 << q for q, a in self.factors if a in (PauliAxis.Z, PauliAxis.Y))

    @property
    def n_y(self) -> int:
        return sum(1 for _, a in self.factors if a is PauliAxis.Y)

    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    def axis_on(self, qubit: int) -> PauliAxis | None:
        return dict(self.factors).get(qubit)

    def phase_diagonal(self) -> np.ndarray:
        """``i**n_y * (-1)**popcount(b & z_mask)`` for every basis index ``b``."""
        idx = np.arange(1 << self.n_qubits, dtype=np.uint64)
        parity = np.bitwise_count(idx & np.uint64(self.z_mask)) & 1
        return _I_POWERS[self.n_y % 4] * (1 - 2 * parity.astype(np.float64))

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        idx = np.arange(amplitudes.size)
        return (self.phase_diagonal() * amplitudes)[idx ^ self.x_mask]


def commutes(a: PauliString, b: PauliString) -> bool:
    if a.n_qubits != b.n_qubits:
        raise PauliError(f"register mismatch: {a.n_qubits} vs {b.n_qubits}")
    fb = dict(b.factors)
    clashes = sum(1 for q, axis in a.factors if q in fb and fb[q] is not axis)
    return clashes % 2 == 0


@dataclass(frozen=True)
class Hamiltonian:
    """Ordered real-weighted sum of Pauli strings.

    Term order matters: product-formula evolutions apply terms in this order.
    """

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        terms = []
        for coeff, string in self.terms:
            if isinstance(coeff, complex) or np.iscomplexobj(coeff):
                raise PauliError("Hamiltonian coefficients must be real")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise PauliError(f"non-finite coefficient {coeff}")
            if string.n_qubits != self.n_qubits:
                raise PauliError(f"term {string.label} acts on {string.n_qubits} qubits, expected {self.n_qubits}")
            terms.append((coeff, string))
        object.__setattr__(self, "terms", tuple(terms))

    # value semantics without hashing numpy caches
    __hash__ = object.__hash__

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def is_diagonal(self) -> bool:
        return all(s.is_diagonal() for _, s in self.terms)

    def reordered(self, order) -> "Hamiltonian":
        return Hamiltonian(self.n_qubits, tuple(self.terms[k] for k in order))

    def scaled(self, factor: float) -> "Hamiltonian":
        return Hamiltonian(self.n_qubits, tuple((factor * c, s) for c, s in self.terms))

    def shifted(self, constant: float) -> "Hamiltonian":
        return Hamiltonian(self.n_qubits, self.terms + ((constant, PauliString(self.n_qubits)),))

    @cached_property
    def groups(self) -> tuple[tuple[int, np.ndarray], ...]:
        """Terms merged by ``x_mask`` into ``(x_mask, diagonal)`` pairs.

        ``H|b> = sum_x d_x(b) |b ^ x>``; groups keep first-appearance order.
        """
        merged: dict[int, np.ndarray] = {}
        for coeff, string in self.terms:
            d = coeff * string.phase_diagonal()
            if string.x_mask in merged:
                merged[string.x_mask] = merged[string.x_mask] + d
            else:
                merged[string.x_mask] = d
        return tuple(merged.items())

    @cached_property
    def diagonal(self) -> np.ndarray:
        if not self.is_diagonal():
            raise PauliError("Hamiltonian is not diagonal")
        total = np.zeros(self.dim)
        for _, d in self.groups:
            total = total + d.real
        return total

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Matrix-free ``H @ amplitudes``."""
        idx = np.arange(self.dim)
        out = np.zeros(self.dim, dtype=np.complex128)
        for x, d in self.groups:
            out += (d * amplitudes)[idx ^ x]
        return out

    def _expectation_array(self, amplitudes: np.ndarray) -> complex:
        idx = np.arange(self.dim)
        total = 0j
        for x, d in self.groups:
            total += np.vdot(amplitudes[idx ^ x], d * amplitudes)
        return total

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached full eigendecomposition ``(eigenvalues, eigenvectors)``."""
        if self.n_qubits > EIGH_CAP:
            raise PauliError(f"full eigensolve limited to {EIGH_CAP} qubits, got {self.n_qubits}")
        return np.linalg.eigh(to_dense(self))

    def to_text(self) -> str:
        lines = [f"# n_qubits {self.n_qubits}"]
        lines += [f"{coeff!r} {string.label}" for coeff, string in self.terms]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "Hamiltonian":
        rows = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.fullmatch(r"#\s*n_qubits\s+(\d+)", line)
                if m and n_qubits is None:
                    n_qubits = int(m.group(1))
                continue
            coeff, _, label = line.partition(" ")
            rows.append((float(coeff), label.strip()))
        if n_qubits is None:
            qubits = [int(q) for _, label in rows for q in re.findall(r"\d+", label)]
            n_qubits = max(qubits, default=0) + 1
        return cls(n_qubits, tuple((c, PauliString.parse(label, n_qubits)) for c, label in rows))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "Hamiltonian":
        return cls.from_text(Path(path).read_text())


def to_dense(h: Hamiltonian, cap: int = DENSE_CAP) -> np.ndarray:
    if h.n_qubits > cap:
        raise PauliError(f"dense matrix limited to {cap} qubits, got {h.n_qubits}")
    idx = np.arange(h.dim)
    mat = np.zeros((h.dim, h.dim), dtype=np.complex128)
    for x, d in h.groups:
        mat[idx ^ x, idx] += d
    return mat


def extremal_eigenvalues(
    h: Hamiltonian, cap: int = DENSE_CAP, dense_limit: int = EIGH_CAP
) -> tuple[float, float, StateVector]:
    """Smallest and largest eigenvalue plus a ground state.

    Up to ``dense_limit`` qubits this is a dense Hermitian eigensolve; between that
    and ``cap`` a matrix-free Lanczos iteration is used instead.
    """
    if not h.terms:
        raise PauliError("extremal eigenvalues of an empty Hamiltonian are undefined")
    if h.n_qubits > cap:
        raise PauliError(f"eigensolve limited to {cap} qubits, got {h.n_qubits}")
    if h.n_qubits <= dense_limit:
        evals, evecs = h.spectrum
        return float(evals[0]), float(evals[-1]), StateVector(h.n_qubits, evecs[:, 0])
    op = LinearOperator((h.dim, h.dim), matvec=h.apply, dtype=np.complex128)
    lo_vals, lo_vecs = eigsh(op, k=1, which="SA", tol=ITERATIVE_TOL)
    hi_vals = eigsh(op, k=1, which="LA", tol=ITERATIVE_TOL, return_eigenvectors=False)
    ground = lo_vecs[:, 0] / np.linalg.norm(lo_vecs[:, 0])
    return float(lo_vals[0]), float(hi_vals[0]), StateVector(h.n_qubits, ground)


def expectation(h: Hamiltonian, psi: StateVector) -> float:
    if psi.n_qubits != h.n_qubits:
        raise PauliError(f"state has {psi.n_qubits} qubits, Hamiltonian {h.n_qubits}")
    norm = np.sqrt(np.vdot(psi.amplitudes, psi.amplitudes).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise PauliError(f"state is not normalized (norm {norm:.12g})")
    value = h._expectation_array(psi.amplitudes)
    scale = max(1.0, sum(abs(c) for c, _ in h.terms))
    if abs(value.imag) > 1e-10 * scale:
        raise PauliError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)
