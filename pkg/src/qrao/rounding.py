"""Pauli rounding, approximation ratios and entanglement-entropy trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import QracEncoding
from .graph import ClassicalExtrema, Graph, bits_to_cut, cut_energy
from .pauli import PauliAxis, PauliString
from .qaoa import AnsatzSpec, ParameterSchedule, layer_states
from .rng import child_seeds, make_rng
from .simulator import partial_trace_entropy, sample_indices
from .statevector import StateVector

TIE_TOL = 1e-12
DEFAULT_PERMUTATIONS = 10
_AXIS_ORDER = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class RoundingOutcome:
    bits: np.ndarray
    cut: np.ndarray
    per_vertex_expectation: np.ndarray
    mode: str
    shots: int | None = None
    seed: int | None = None
    n_ties: int = 0


def _outcome(expect: np.ndarray, tie_mask: np.ndarray, mode: str, shots=None, seed=None) -> RoundingOutcome:
    # ties resolve to bit 0
    bits = np.where(tie_mask, 0, (expect < 0).astype(np.int64)).astype(np.int64)
    return RoundingOutcome(bits, bits_to_cut(bits), expect, mode, shots, seed, int(tie_mask.sum()))


def vertex_expectations(psi: StateVector, enc: QracEncoding) -> np.ndarray:
    """Exact ``<P_v>`` of every vertex's assigned single-qubit Pauli."""
    if psi.n_qubits != enc.n_qubits:
        raise MetricsError(f"state has {psi.n_qubits} qubits, encoding {enc.n_qubits}")
    amps = psi.amplitudes
    out = np.empty(enc.n_vertices)
    for v, (q, axis) in enumerate(enc.assignment):
        string = PauliString(enc.n_qubits, ((q, axis),))
        out[v] = np.vdot(amps, string.apply(amps)).real
    return out


def pauli_round_exact(psi: StateVector, enc: QracEncoding) -> RoundingOutcome:
    expect = vertex_expectations(psi, enc)
    return _outcome(expect, np.abs(expect) <= TIE_TOL, "exact")


def pauli_round_sampled(psi: StateVector, enc: QracEncoding, shots_per_axis: int, seed: int) -> RoundingOutcome:
    """Estimate each vertex's bias from ``shots_per_axis`` shots of one global setting per used axis."""
    if psi.n_qubits != enc.n_qubits:
        raise MetricsError(f"state has {psi.n_qubits} qubits, encoding {enc.n_qubits}")
    if shots_per_axis < 1:
        raise MetricsError("shots_per_axis must be positive")
    n = enc.n_qubits
    idx = np.arange(1 << n)
    signs = 1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)
    # one stream per axis regardless of m, so X and Z draws do not depend on the code
    seeds = dict(zip(_AXIS_ORDER, child_seeds(seed, len(_AXIS_ORDER))))
    qubit_means: dict[PauliAxis, np.ndarray] = {}
    for axis in enc.axes_used():
        counts = sample_indices(psi, [axis] * n, shots_per_axis, seeds[axis])
        qubit_means[axis] = counts @ signs / shots_per_axis
    expect = np.array([qubit_means[a][q] for q, a in enc.assignment])
    return _outcome(expect, expect == 0, "sampled", shots_per_axis, seed)


def approximation_ratio(energy: float, e_min: float, e_max: float) -> float:
    """``(E - E_max) / (E_min - E_max)``: 1 at the minimum, 0 at the maximum."""
    if not e_min < e_max:
        raise MetricsError(f"degenerate spectrum: e_min={e_min}, e_max={e_max}")
    return (energy - e_max) / (e_min - e_max)


def alpha_r(e_qrao: float, e_min: float, e_max: float) -> float:
    return approximation_ratio(e_qrao, e_min, e_max)


def alpha_c(rounded: RoundingOutcome, g: Graph, extrema: ClassicalExtrema) -> float:
    return approximation_ratio(cut_energy(g, rounded.cut), extrema.e_min, extrema.e_max)


def even_bipartitions(n: int, count: int, seed: int) -> list[np.ndarray]:
    """``count`` random subsets of ``n // 2`` qubits."""
    if n < 2:
        raise MetricsError("an even bipartition needs at least two qubits")
    rng = make_rng(seed)
    return [np.sort(rng.permutation(n)[: n // 2]) for _ in range(count)]


def mean_entropy(psi: StateVector, subsets) -> float:
    return float(np.mean([partial_trace_entropy(psi, s) for s in subsets]))


def entropy_trajectory(
    spec: AnsatzSpec, params: ParameterSchedule, permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0
) -> list[float]:
    """Mean bipartite entropy (nats) of the initial state and after every layer.

    The same random bipartitions are reused at every layer.
    """
    subsets = even_bipartitions(spec.n_qubits, permutations, seed)
    return [mean_entropy(psi, subsets) for psi in layer_states(spec, params)]
