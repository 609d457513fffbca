import math

import numpy as np
import pytest
from scipy.linalg import expm

from qrao.encoding import assign_qubits, maxcut_hamiltonian, qrac_product_state, relaxed_hamiltonian
from qrao.graph import Graph, complete_bipartite, generate_random_regular
from qrao.pauli import Hamiltonian, PauliAxis, PauliString, expectation
from qrao.simulator import (
    EvolutionMethod,
    InitialState,
    SimulationError,
    apply_mixer_layer,
    apply_pauli_rotation,
    evolve,
    evolve_exact,
    evolve_grouped_trotter,
    evolve_trotter,
    pair_blocks,
    partial_trace_entropy,
    prepare_basis,
    sample_in_axis,
)
from qrao.statevector import StateError, StateVector

from oracles import MATS, kron_hamiltonian, kron_string, random_state

SINGLET = StateVector(2, np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2))


def k33():
    g = complete_bipartite(3, 3)
    return relaxed_hamiltonian(g, assign_qubits(g))


def relaxed(n, seed):
    g = generate_random_regular(n, 3, seed)
    return relaxed_hamiltonian(g, assign_qubits(g))


def dense_evolve(h, psi, gamma):
    return expm(-1j * gamma * kron_hamiltonian(h)) @ psi.amplitudes


def test_prepare_basis():
    assert np.allclose(prepare_basis(1, InitialState.PLUS_ALL).amplitudes, [1 / math.sqrt(2)] * 2)
    assert np.allclose(prepare_basis(2, InitialState.ZERO_ALL).amplitudes, [1, 0, 0, 0])
    psi = prepare_basis(1, InitialState.MINUS_I_ALL)
    y = Hamiltonian(1, ((1.0, PauliString.parse("Y0", 1)),))
    assert expectation(y, psi) == pytest.approx(-1.0)


def test_statevector_validation_and_bytes():
    with pytest.raises(StateError):
        StateVector(2, np.ones(3, dtype=complex))
    with pytest.raises(StateError):
        StateVector(1, np.array([1, 1], dtype=complex))
    psi = random_state(np.random.default_rng(1), 3)
    assert np.array_equal(StateVector.from_bytes(psi.to_bytes()).amplitudes, psi.amplitudes)


def test_pauli_rotation_examples():
    zero = StateVector(1, np.array([1, 0], dtype=complex))
    out = apply_pauli_rotation(zero, PauliString.parse("Z0", 1), 0.7)
    assert np.allclose(out.amplitudes, [np.exp(-0.7j), 0])
    out = apply_pauli_rotation(prepare_basis(2, "zero"), PauliString.parse("X0*X1", 2), math.pi / 2)
    assert np.allclose(out.amplitudes, [0, 0, 0, -1j])
    psi = random_state(np.random.default_rng(2), 3)
    same = apply_pauli_rotation(psi, PauliString.parse("X0*Y2", 3), 0.0)
    assert np.array_equal(same.amplitudes, psi.amplitudes)
    with pytest.raises(SimulationError):
        apply_pauli_rotation(psi, PauliString.parse("X0", 2), 0.1)


def test_pauli_rotation_matches_expm():
    rng = np.random.default_rng(3)
    for label in ("X0*Y1*Z2", "Y1", "Z0*Z2", "X2*X0"):
        s = PauliString.parse(label, 3)
        psi = random_state(rng, 3)
        theta = rng.normal()
        ref = expm(-1j * theta * kron_string(3, [(q, a.value) for q, a in s.factors])) @ psi.amplitudes
        assert np.allclose(apply_pauli_rotation(psi, s, theta).amplitudes, ref, atol=1e-12)


@pytest.mark.parametrize("axis", list(PauliAxis))
def test_mixer_layer_matches_expm(axis):
    rng = np.random.default_rng(4)
    psi = random_state(rng, 3)
    beta = 0.37
    generator = sum(kron_string(3, [(q, axis.value)]) for q in range(3))
    ref = expm(-1j * beta * generator) @ psi.amplitudes
    assert np.allclose(apply_mixer_layer(psi.amplitudes.copy(), axis, beta, 3), ref, atol=1e-12)


def test_evolve_exact_examples():
    h = k33()
    psi = random_state(np.random.default_rng(5), 2)
    assert np.allclose(evolve_exact(psi, h, 0.0).amplitudes, psi.amplitudes)
    out = evolve_exact(SINGLET, h, 0.4)
    assert np.allclose(out.amplitudes, np.exp(3j * 0.4) * SINGLET.amplitudes)
    twice = evolve_exact(evolve_exact(psi, h, 0.3), h, 0.5)
    assert np.allclose(twice.amplitudes, evolve_exact(psi, h, 0.8).amplitudes, atol=1e-9)


def test_evolve_exact_matches_expm():
    h = relaxed(10, 2)
    psi = random_state(np.random.default_rng(6), h.n_qubits)
    out = evolve_exact(psi, h, 0.45)
    assert np.allclose(out.amplitudes, dense_evolve(h, psi, 0.45), atol=1e-10)
    assert out.norm() == pytest.approx(1.0, abs=1e-9)


def test_trotter_on_commuting_terms_is_exact():
    g = generate_random_regular(8, 3, 3)
    h = maxcut_hamiltonian(g)
    psi = random_state(np.random.default_rng(7), 8)
    exact = evolve_exact(psi, h, 0.6)
    for steps in (1, 2, 5):
        assert np.allclose(evolve_trotter(psi, h, 0.6, steps).amplitudes, exact.amplitudes, atol=1e-9)


def test_trotter_single_term_equals_rotation():
    s = PauliString.parse("X0*Z1", 2)
    h = Hamiltonian(2, ((0.8, s),))
    psi = random_state(np.random.default_rng(8), 2)
    assert np.allclose(evolve_trotter(psi, h, 0.5, 1).amplitudes, apply_pauli_rotation(psi, s, 0.4).amplitudes)


def test_trotter_matches_explicit_product():
    h = relaxed(8, 1)
    psi = random_state(np.random.default_rng(9), h.n_qubits)
    gamma, steps = 0.35, 3
    step = np.eye(h.dim, dtype=complex)
    for c, s in h.terms:
        step = expm(-1j * gamma * c / steps * kron_string(h.n_qubits, [(q, a.value) for q, a in s.factors])) @ step
    ref = np.linalg.matrix_power(step, steps) @ psi.amplitudes
    assert np.allclose(evolve_trotter(psi, h, gamma, steps).amplitudes, ref, atol=1e-10)


def test_trotter_converges_on_k33():
    psi = random_state(np.random.default_rng(10), 2)
    h = k33()
    exact = evolve_exact(psi, h, 0.3)
    assert evolve_trotter(psi, h, 0.3, 64).fidelity(exact) >= 1 - 1e-4


def test_trotter_error_decreases_with_steps():
    errors = np.zeros(6)
    steps = (1, 2, 4, 8, 16, 64)
    for seed in range(10):
        h = relaxed(10, seed)
        psi = prepare_basis(h.n_qubits, "plus")
        exact = evolve_exact(psi, h, 0.4)
        errors += [1 - evolve_trotter(psi, h, 0.4, t).fidelity(exact) for t in steps]
    assert all(a >= b for a, b in zip(errors, errors[1:]))


def test_grouped_single_group_is_exact():
    h = k33()
    psi = random_state(np.random.default_rng(11), 2)
    out = evolve_grouped_trotter(psi, h, 0.7, 1)
    assert np.allclose(out.amplitudes, evolve_exact(psi, h, 0.7).amplitudes, atol=1e-12)


def test_grouped_disjoint_groups_is_exact():
    terms = []
    for a in "XYZ":
        for b in "XZ":
            terms.append((1.0, PauliString.parse(f"{a}0*{b}1", 4)))
            terms.append((0.5, PauliString.parse(f"{b}2*{a}3", 4)))
    h = Hamiltonian(4, tuple(terms))
    psi = random_state(np.random.default_rng(12), 4)
    out = evolve_grouped_trotter(psi, h, 0.9, 1)
    assert np.allclose(out.amplitudes, dense_evolve(h, psi, 0.9), atol=1e-9)


def test_grouped_matches_explicit_block_product():
    h = relaxed(10, 4)
    n = h.n_qubits
    psi = random_state(np.random.default_rng(13), n)
    order, blocks = [], {}
    for c, s in h.terms:
        pair = s.support
        if pair not in blocks:
            order.append(pair)
            blocks[pair] = 0
        blocks[pair] = blocks[pair] + c * kron_string(n, [(q, a.value) for q, a in s.factors])
    gamma, steps = 0.4, 2
    step = np.eye(h.dim, dtype=complex)
    for pair in order:
        step = expm(-1j * gamma / steps * blocks[pair]) @ step
    ref = np.linalg.matrix_power(step, steps) @ psi.amplitudes
    assert np.allclose(evolve_grouped_trotter(psi, h, gamma, steps).amplitudes, ref, atol=1e-10)


def test_grouped_rejects_bad_hamiltonians():
    three_body = Hamiltonian(3, ((1.0, PauliString.parse("X0*X1*X2", 3)),))
    with pytest.raises(SimulationError):
        pair_blocks(three_body)
    h = Hamiltonian(3, ((1.0, PauliString.parse("X0*X1", 3)), (1.0, PauliString.parse("Z1*Z2", 3))))
    with pytest.raises(SimulationError):
        pair_blocks(h, groups=[(0, 1)])


def test_grouped_beats_plain_trotter_in_median():
    wins = []
    for seed in range(20):
        h = relaxed(10, seed)
        psi = prepare_basis(h.n_qubits, "zero")
        exact = evolve_exact(psi, h, 0.4)
        grouped = evolve_grouped_trotter(psi, h, 0.4, 1).fidelity(exact)
        plain = evolve_trotter(psi, h, 0.4, 1).fidelity(exact)
        wins.append(grouped - plain)
    assert np.median(wins) >= 0


def test_evolve_dispatch():
    h = relaxed(8, 2)
    psi = prepare_basis(h.n_qubits, "plus")
    assert np.allclose(evolve(psi, h, 0.2, EvolutionMethod.parse("trotter:3")).amplitudes,
                       evolve_trotter(psi, h, 0.2, 3).amplitudes)
    assert str(EvolutionMethod.parse("grouped:4")) == "grouped:4"
    with pytest.raises(SimulationError):
        EvolutionMethod("trotter", 0)


def test_norm_preserved_by_all_evolutions():
    h = relaxed(12, 5)
    psi = random_state(np.random.default_rng(14), h.n_qubits)
    for method in ("exact", "trotter:2", "grouped:2"):
        out = evolve(psi, h, 1.3, EvolutionMethod.parse(method))
        assert out.norm() == pytest.approx(1.0, abs=1e-9)


def test_entropy_examples():
    assert partial_trace_entropy(prepare_basis(3, "plus"), [0]) == pytest.approx(0.0, abs=1e-12)
    assert partial_trace_entropy(SINGLET, [0]) == pytest.approx(math.log(2))
    ghz = np.zeros(16, dtype=complex)
    ghz[0] = ghz[15] = 1 / math.sqrt(2)
    assert partial_trace_entropy(StateVector(4, ghz), [0, 1]) == pytest.approx(math.log(2))
    with pytest.raises(SimulationError):
        partial_trace_entropy(SINGLET, [])
    with pytest.raises(SimulationError):
        partial_trace_entropy(SINGLET, [0, 1])


def test_entropy_matches_dense_partial_trace_and_bounds():
    rng = np.random.default_rng(15)
    psi = random_state(rng, 4)
    # subset {1, 3}: reshape with qubit 3 as the slowest axis
    t = psi.amplitudes.reshape(2, 2, 2, 2)  # axes: q3, q2, q1, q0
    rho = np.einsum("aibj,cidj->abcd", t, t.conj()).reshape(4, 4)
    p = np.linalg.eigvalsh(rho)
    p = p[p > 1e-12]
    assert partial_trace_entropy(psi, [1, 3]) == pytest.approx(-(p * np.log(p)).sum(), abs=1e-10)
    for subset in ([0], [0, 1], [2, 3], [0, 1, 2]):
        s = partial_trace_entropy(psi, subset)
        assert 0 <= s <= min(len(subset), 4 - len(subset)) * math.log(2) + 1e-12


def test_sampling_examples():
    assert sample_in_axis(prepare_basis(1, "zero"), ["Z"], 100, 1) == {"0": 100}
    assert sample_in_axis(prepare_basis(2, "plus"), ["X", "X"], 50, 1) == {"00": 50}
    minus_i = prepare_basis(1, "minus_i")
    assert sample_in_axis(minus_i, ["Y"], 20, 3) == {"1": 20}


def test_qrac_state_decoding_frequency():
    enc = assign_qubits(Graph(3, []))
    psi = qrac_product_state(enc, [0, 0, 0])
    counts = sample_in_axis(psi, ["X"], 10**6, 11)
    assert counts["0"] / 10**6 == pytest.approx(0.5 + 0.5 / math.sqrt(3), abs=0.002)


def test_sampling_is_deterministic_and_consistent_with_amplitudes():
    psi = random_state(np.random.default_rng(16), 3)
    shots = 10**5
    counts = sample_in_axis(psi, ["Z", "Z", "Z"], shots, 42)
    assert counts == sample_in_axis(psi, ["Z", "Z", "Z"], shots, 42)
    expected = np.abs(psi.amplitudes) ** 2 * shots
    observed = np.array([counts.get("".join(str((i >> q) & 1) for q in range(3)), 0) for i in range(8)])
    chi2 = ((observed - expected) ** 2 / expected).sum()
    # 7 degrees of freedom: the 0.999 quantile is about 24.3
    assert chi2 < 24.3


def test_bitstrings_print_qubit_zero_first():
    psi = StateVector(2, np.array([0, 1, 0, 0], dtype=complex))  # qubit 0 set
    assert sample_in_axis(psi, ["Z", "Z"], 5, 0) == {"10": 5}


def test_mats_are_paulis():
    for m in MATS.values():
        assert np.allclose(m @ m, np.eye(2))
