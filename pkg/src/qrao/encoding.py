"""Quantum random access codes for MaxCut.

Each vertex is assigned a ``(qubit, axis)`` pair. Adjacent vertices never share a
qubit, so every edge becomes a two-qubit Pauli term of the relaxed Hamiltonian.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph
from .pauli import Hamiltonian, PauliAxis, PauliString
from .rng import make_rng
from .statevector import StateVector

AXIS_FILL_ORDER = {
    3: (PauliAxis.X, PauliAxis.Y, PauliAxis.Z),
    2: (PauliAxis.X, PauliAxis.Z),
}


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class QracEncoding:
    """Vertex ``v`` lives on qubit ``assignment[v][0]`` along axis ``assignment[v][1]``."""

    m: int
    n_qubits: int
    assignment: tuple[tuple[int, PauliAxis], ...]

    def __post_init__(self):
        if self.m not in AXIS_FILL_ORDER:
            raise EncodingError(f"only (3,1) and (2,1) codes are supported, got m={self.m}")
        assignment = tuple((int(q), PauliAxis(a)) for q, a in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        allowed = AXIS_FILL_ORDER[self.m]
        slots = set()
        for v, (q, axis) in enumerate(assignment):
            if not 0 <= q < self.n_qubits:
                raise EncodingError(f"vertex {v} placed on qubit {q} outside register of {self.n_qubits}")
            if axis not in allowed:
                raise EncodingError(f"axis {axis.value} not available for m={self.m}")
            if (q, axis) in slots:
                raise EncodingError(f"slot ({q}, {axis.value}) hosts more than one vertex")
            slots.add((q, axis))

    @property
    def n_vertices(self) -> int:
        return len(self.assignment)

    @property
    def bias(self) -> float:
        """Decoding advantage over a coin flip: success probability is 1/2 + bias."""
        return 1.0 / (2.0 * math.sqrt(self.m))

    def qubit_of(self, vertex: int) -> int:
        return self.assignment[vertex][0]

    def axis_of(self, vertex: int) -> PauliAxis:
        return self.assignment[vertex][1]

    def vertices_on(self, qubit: int) -> list[int]:
        return [v for v, (q, _) in enumerate(self.assignment) if q == qubit]

    def occupancy(self) -> np.ndarray:
        counts = np.zeros(self.n_qubits, dtype=np.int64)
        for q, _ in self.assignment:
            counts[q] += 1
        return counts

    def axes_used(self) -> tuple[PauliAxis, ...]:
        used = {a for _, a in self.assignment}
        return tuple(a for a in AXIS_FILL_ORDER[self.m] if a in used)

    def validate(self, g: Graph) -> None:
        if self.n_vertices != g.n_nodes:
            raise EncodingError(f"encoding covers {self.n_vertices} vertices, graph has {g.n_nodes}")
        for i, j in g.edges:
            if self.qubit_of(i) == self.qubit_of(j):
                raise EncodingError(f"adjacent vertices {i} and {j} share qubit {self.qubit_of(i)}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n_qubits": self.n_qubits,
            "assignment": [[v, q, a.value] for v, (q, a) in enumerate(self.assignment)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QracEncoding":
        rows = sorted(data["assignment"], key=lambda r: r[0])
        if [r[0] for r in rows] != list(range(len(rows))):
            raise EncodingError("assignment must list every vertex 0..N-1 exactly once")
        return cls(int(data["m"]), int(data["n_qubits"]), tuple((int(q), PauliAxis(a)) for _, q, a in rows))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "QracEncoding":
        return cls.from_dict(json.loads(Path(path).read_text()))


def assign_qubits(g: Graph, m: int = 3, seed: int | None = None) -> QracEncoding:
    """Greedy first-fit packing of vertices into qubits.

    Vertices are visited by decreasing degree. Ties go by vertex index, or by a
    seeded random permutation when ``seed`` is given. Each vertex takes the first
    qubit with a free axis and no neighbour on it; otherwise a new qubit is opened.
    """
    if m not in AXIS_FILL_ORDER:
        raise EncodingError(f"m must be 2 or 3, got {m}")
    axes = AXIS_FILL_ORDER[m]
    deg = g.degrees()
    if seed is None:
        tiebreak = np.arange(g.n_nodes)
    else:
        tiebreak = make_rng(seed).permutation(g.n_nodes)
    order = sorted(range(g.n_nodes), key=lambda v: (-deg[v], tiebreak[v]))
    nbrs = g.neighbors()
    qubits: list[list[int]] = []
    placement: dict[int, tuple[int, PauliAxis]] = {}
    for v in order:
        for q, members in enumerate(qubits):
            if len(members) < m and not nbrs[v].intersection(members):
                break
        else:
            q = len(qubits)
            qubits.append([])
        placement[v] = (q, axes[len(qubits[q])])
        qubits[q].append(v)
    return QracEncoding(m, max(len(qubits), 1), tuple(placement[v] for v in range(g.n_nodes)))


def relaxed_hamiltonian(g: Graph, enc: QracEncoding) -> Hamiltonian:
    """One ``+1`` weighted two-qubit Pauli term per edge, in edge order."""
    enc.validate(g)
    terms = []
    for i, j in g.edges:
        string = PauliString(enc.n_qubits, ((enc.qubit_of(i), enc.axis_of(i)), (enc.qubit_of(j), enc.axis_of(j))))
        terms.append((1.0, string))
    return Hamiltonian(enc.n_qubits, tuple(terms))


def maxcut_hamiltonian(g: Graph) -> Hamiltonian:
    """Diagonal ``sum Z_i Z_j`` on one qubit per vertex."""
    terms = tuple(
        (1.0, PauliString(g.n_nodes, ((i, PauliAxis.Z), (j, PauliAxis.Z)))) for i, j in g.edges
    )
    return Hamiltonian(g.n_nodes, terms)


def bloch_state(r) -> np.ndarray:
    """Pure single-qubit state with unit Bloch vector ``r = (rx, ry, rz)``."""
    rx, ry, rz = r
    if rz <= -1.0 + 1e-15:
        return np.array([0.0, 1.0], dtype=np.complex128)
    amp = np.array([1.0 + rz, rx + 1j * ry], dtype=np.complex128)
    return amp / math.sqrt(2.0 * (1.0 + rz))


def qrac_product_state(enc: QracEncoding, bits) -> StateVector:
    """Product state whose qubit Bloch vectors carry the encoded bits.

    Occupied axes get component ``(-1)**bit / sqrt(d)`` with ``d`` the number of
    vertices on that qubit; empty axes get 0.
    """
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (enc.n_vertices,):
        raise EncodingError(f"expected {enc.n_vertices} bits, got shape {bits.shape}")
    index = {PauliAxis.X: 0, PauliAxis.Y: 1, PauliAxis.Z: 2}
    vectors = np.zeros((enc.n_qubits, 3))
    for v, (q, axis) in enumerate(enc.assignment):
        vectors[q, index[axis]] = 1.0 - 2.0 * bits[v]
    state = np.ones(1, dtype=np.complex128)
    for q in range(enc.n_qubits):
        r = vectors[q]
        d = np.count_nonzero(r)
        single = bloch_state(r / math.sqrt(d)) if d else np.array([1.0, 0.0], dtype=np.complex128)
        # qubit q is bit q of the basis index, so it goes on the left of the kron
        state = np.kron(single, state)
    return StateVector(enc.n_qubits, state)
