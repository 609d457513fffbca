import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrao.encoding import (
    EncodingError,
    QracEncoding,
    assign_qubits,
    maxcut_hamiltonian,
    qrac_product_state,
    relaxed_hamiltonian,
)
from qrao.graph import Graph, complete_bipartite, complete_graph, cut_energy, generate_random_regular, path_graph, bits_to_cut
from qrao.pauli import PauliAxis, expectation, extremal_eigenvalues

X, Y, Z = PauliAxis.X, PauliAxis.Y, PauliAxis.Z


def bloch(psi_1q):
    a, b = psi_1q
    return np.array([2 * (np.conj(a) * b).real, 2 * (np.conj(a) * b).imag, abs(a) ** 2 - abs(b) ** 2])


def check_valid(g, enc, m):
    assert enc.n_vertices == g.n_nodes
    for i, j in g.edges:
        assert enc.qubit_of(i) != enc.qubit_of(j)
    assert enc.occupancy().max() <= m
    slots = [(enc.qubit_of(v), enc.axis_of(v)) for v in range(g.n_nodes)]
    assert len(set(slots)) == len(slots)
    if m == 2:
        assert Y not in enc.axes_used()


def test_k33_encoding():
    enc = assign_qubits(complete_bipartite(3, 3), m=3)
    assert enc.n_qubits == 2
    assert [enc.qubit_of(v) for v in range(6)] == [0, 0, 0, 1, 1, 1]
    assert [enc.axis_of(v) for v in range(3)] == [X, Y, Z]
    assert [enc.axis_of(v) for v in range(3, 6)] == [X, Y, Z]


def test_triangle_and_path_encodings():
    tri = assign_qubits(complete_graph(3))
    assert tri.n_qubits == 3
    path = assign_qubits(path_graph(4))
    assert path.n_qubits == 2
    assert sorted(path.vertices_on(path.qubit_of(0))) == [0, 2]
    assert sorted(path.vertices_on(path.qubit_of(1))) == [1, 3]


def test_encoding_rejects_bad_slots():
    with pytest.raises(EncodingError):
        QracEncoding(3, 1, ((0, X), (0, X)))
    with pytest.raises(EncodingError):
        QracEncoding(2, 1, ((0, Y),))
    enc = QracEncoding(3, 1, ((0, X), (0, Y)))
    with pytest.raises(EncodingError):
        enc.validate(Graph(2, [(0, 1)]))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 12).map(lambda k: 2 * k), seed=st.integers(0, 2**32 - 1), m=st.sampled_from([2, 3]))
def test_assign_qubits_is_valid_and_deterministic(n, seed, m):
    g = generate_random_regular(n, 3, seed)
    enc = assign_qubits(g, m, seed=seed % 97)
    check_valid(g, enc, m)
    assert math.ceil(n / m) <= enc.n_qubits <= n
    assert assign_qubits(g, m, seed=seed % 97) == enc


def test_encoding_json_round_trip(tmp_path):
    g = generate_random_regular(12, 3, 2)
    enc = assign_qubits(g)
    path = tmp_path / "enc.json"
    enc.save(path)
    assert QracEncoding.load(path) == enc


def test_relaxed_hamiltonian_k33():
    g = complete_bipartite(3, 3)
    h = relaxed_hamiltonian(g, assign_qubits(g))
    labels = {s.label for _, s in h.terms}
    expected = {f"{a}0*{b}1" for a, b in itertools.product("XYZ", repeat=2)}
    assert labels == expected
    assert all(c == 1.0 for c, _ in h.terms)


def test_relaxed_hamiltonian_follows_edge_order():
    g = generate_random_regular(10, 3, 3)
    enc = assign_qubits(g)
    h = relaxed_hamiltonian(g, enc)
    assert len(h.terms) == g.n_edges
    for (i, j), (_, s) in zip(g.edges, h.terms):
        assert s.axis_on(enc.qubit_of(i)) == enc.axis_of(i)
        assert s.axis_on(enc.qubit_of(j)) == enc.axis_of(j)
    single = relaxed_hamiltonian(path_graph(2), assign_qubits(path_graph(2)))
    assert len(single.terms) == 1 and single.n_qubits == 2


def test_relaxed_hamiltonian_rejects_invalid_encoding():
    with pytest.raises(EncodingError):
        relaxed_hamiltonian(Graph(2, [(0, 1)]), QracEncoding(3, 1, ((0, X), (0, Y))))


def test_product_state_bloch_vectors():
    enc = QracEncoding(3, 1, ((0, X), (0, Y), (0, Z)))
    psi = qrac_product_state(enc, [0, 0, 0])
    assert np.allclose(bloch(psi.amplitudes), np.ones(3) / math.sqrt(3))
    for bits in itertools.product((0, 1), repeat=3):
        r = bloch(qrac_product_state(enc, bits).amplitudes)
        assert np.allclose(r, (-1.0) ** np.array(bits) / math.sqrt(3))
    lone = QracEncoding(3, 1, ((0, Z),))
    assert np.allclose(qrac_product_state(lone, [0]).amplitudes, [1, 0])
    with pytest.raises(EncodingError):
        qrac_product_state(enc, [0, 1])


def test_k33_product_state_energy():
    g = complete_bipartite(3, 3)
    enc = assign_qubits(g)
    h = relaxed_hamiltonian(g, enc)
    assert expectation(h, qrac_product_state(enc, [0, 0, 0, 1, 1, 1])) == pytest.approx(-3.0)


@pytest.mark.parametrize("m", [2, 3])
def test_product_state_energy_matches_edge_formula(m):
    rng = np.random.default_rng(m)
    g = generate_random_regular(12, 3, 8)
    enc = assign_qubits(g, m)
    h = relaxed_hamiltonian(g, enc)
    d = enc.occupancy()
    for _ in range(30):
        bits = rng.integers(0, 2, size=12)
        expected = sum(
            (-1.0) ** (bits[i] + bits[j]) / math.sqrt(d[enc.qubit_of(i)] * d[enc.qubit_of(j)]) for i, j in g.edges
        )
        assert expectation(h, qrac_product_state(enc, bits)) == pytest.approx(expected, abs=1e-12)


def test_full_occupancy_energy_is_cut_affine():
    g = complete_bipartite(3, 3)
    enc = assign_qubits(g)
    h = relaxed_hamiltonian(g, enc)
    for bits in itertools.product((0, 1), repeat=6):
        e = expectation(h, qrac_product_state(enc, bits))
        assert e == pytest.approx(cut_energy(g, bits_to_cut(bits)) / 3, abs=1e-12)


def test_relaxation_lower_bounds_product_states():
    for seed in range(4):
        g = generate_random_regular(10, 3, seed)
        enc = assign_qubits(g)
        h = relaxed_hamiltonian(g, enc)
        e_min = extremal_eigenvalues(h)[0]
        best = min(expectation(h, qrac_product_state(enc, b)) for b in itertools.product((0, 1), repeat=10))
        assert e_min <= best + 1e-12


def test_maxcut_hamiltonian_is_diagonal_cut_energy():
    g = generate_random_regular(8, 3, 1)
    h = maxcut_hamiltonian(g)
    assert h.is_diagonal()
    diag = h.diagonal
    for index in range(1 << 8):
        bits = [(index >> q) & 1 for q in range(8)]
        assert diag[index] == cut_energy(g, bits_to_cut(bits))
