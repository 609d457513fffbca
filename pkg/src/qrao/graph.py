"""MaxCut instances: unweighted graphs, random regular generation and exact extrema."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .rng import make_rng

MAX_RESTARTS = 10_000
DEFAULT_BRUTE_FORCE_CAP = 30


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted simple graph with 0-indexed nodes.

    Edges are stored as ``(min, max)`` pairs; their order is kept as given because
    it fixes the default term order of the cost Hamiltonians built from the graph.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_nodes < 1:
            raise GraphError(f"n_nodes must be positive, got {self.n_nodes}")
        normalized = []
        seen = set()
        for edge in self.edges:
            i, j = (int(v) for v in edge)
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise GraphError(f"edge {edge} has an endpoint outside [0, {self.n_nodes})")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
            normalized.append(key)
        object.__setattr__(self, "edges", tuple(normalized))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for i, j in self.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return nbrs

    def is_regular(self, k: int) -> bool:
        return bool(np.all(self.degrees() == k))

    def to_dict(self) -> dict:
        return {"n": self.n_nodes, "edges": [list(e) for e in self.edges], "indexing": "0-based"}

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        indexing = data.get("indexing", "0-based")
        if indexing not in ("0-based", "1-based"):
            raise GraphError(f"unknown indexing {indexing!r}")
        offset = 1 if indexing == "1-based" else 0
        return cls(int(data["n"]), tuple((int(i) - offset, int(j) - offset) for i, j in data["edges"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Graph":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ClassicalExtrema:
    e_min: int
    e_max: int
    argmin_cut: np.ndarray
    max_cut_value: int


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def complete_bipartite(a: int, b: int) -> Graph:
    return Graph(a + b, tuple((i, a + j) for i in range(a) for j in range(b)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def generate_random_regular(n: int, k: int, seed: int) -> Graph:
    """Sample a simple ``k``-regular graph on ``n`` nodes with the pairing model.

    A pairing that produces a self-loop or a repeated edge is discarded as a whole
    and redrawn; after ``MAX_RESTARTS`` failures a ``GraphError`` is raised.
    """
    if n < 1 or k < 0:
        raise GraphError(f"invalid (n, k) = ({n}, {k})")
    if (n * k) % 2:
        raise GraphError(f"n * k must be even, got n={n}, k={k}")
    if k >= n:
        raise GraphError(f"degree k={k} must be smaller than n={n}")
    rng = make_rng(seed)
    stubs = np.repeat(np.arange(n), k)
    for _ in range(MAX_RESTARTS):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        if np.any(lo == hi):
            continue
        keys = lo * n + hi
        if len(np.unique(keys)) != len(keys):
            continue
        edges = sorted(zip(lo.tolist(), hi.tolist()))
        return Graph(n, tuple(edges))
    raise GraphError(f"no simple {k}-regular graph on {n} nodes after {MAX_RESTARTS} pairings")


def cut_energy(g: Graph, cut) -> int:
    """Return the Ising energy ``sum_{(i,j) in E} z_i z_j`` of a +-1 labelling."""
    z = np.asarray(cut)
    if z.shape != (g.n_nodes,):
        raise GraphError(f"cut has shape {z.shape}, graph has {g.n_nodes} nodes")
    if not np.all(np.abs(z) == 1):
        raise GraphError("cut labels must be +1 or -1")
    if not g.edges:
        return 0
    e = np.asarray(g.edges)
    return int(np.sum(z[e[:, 0]] * z[e[:, 1]]))


def cut_value(g: Graph, cut) -> int:
    return (g.n_edges - cut_energy(g, cut)) // 2


def bits_to_cut(bits) -> np.ndarray:
    """Bit 0 maps to label +1 and bit 1 to label -1."""
    return 1 - 2 * np.asarray(bits, dtype=np.int64)


@numba.njit(cache=True)
def _gray_code_extrema(n, indptr, indices, n_edges):
    # The last node stays at +1; the global flip covers the other half.
    z = np.ones(n, dtype=np.int64)
    energy = n_edges
    e_min = energy
    e_max = energy
    best = np.int64(0)
    code = np.int64(0)
    for k in range(1, np.int64(1) << (n - 1)):
        b = 0
        while (k >> b) & 1 == 0:
            b += 1
        s = 0
        for t in range(indptr[b], indptr[b + 1]):
            s += z[indices[t]]
        energy -= 2 * z[b] * s
        z[b] = -z[b]
        code ^= np.int64(1) << b
        if energy < e_min:
            e_min = energy
            best = code
        if energy > e_max:
            e_max = energy
    return e_min, e_max, best


def brute_force_extrema(g: Graph, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> ClassicalExtrema:
    """Exact minimum and maximum of the Ising energy by Gray-code enumeration."""
    n = g.n_nodes
    if n > cap:
        raise GraphError(f"brute force limited to {cap} nodes, graph has {n}")
    nbrs = g.neighbors()
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(s) for s in nbrs])
    indices = np.array([v for s in nbrs for v in sorted(s)], dtype=np.int64)
    e_min, e_max, code = _gray_code_extrema(n, indptr, indices, g.n_edges)
    bits = (int(code) >> np.arange(n)) & 1
    argmin = bits_to_cut(bits)
    return ClassicalExtrema(int(e_min), int(e_max), argmin, (g.n_edges - int(e_min)) // 2)
