"""Alternating-operator ansatz over relaxed (QRAO) and diagonal (standard) cost Hamiltonians."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .encoding import QracEncoding, assign_qubits, maxcut_hamiltonian, relaxed_hamiltonian
from .graph import Graph
from .pauli import Hamiltonian, PauliAxis, expectation
from .rng import make_rng
from .simulator import (
    EvolutionMethod,
    InitialState,
    SimulationError,
    apply_mixer_layer,
    exact_propagate,
    grouped_trotter_propagate,
    pair_blocks,
    prepare_basis,
    trotter_propagate,
)
from .statevector import StateVector

DEFAULT_INIT = {
    PauliAxis.X: InitialState.PLUS_ALL,
    PauliAxis.Y: InitialState.MINUS_I_ALL,
    PauliAxis.Z: InitialState.ZERO_ALL,
}

# the precomputed mixer eigenbasis is a dense 2^n x 2^n matrix
DENSE_MIXER_CAP = 10


class AnsatzError(ValueError):
    pass


@dataclass(frozen=True)
class ParameterSchedule:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        gammas = tuple(float(g) for g in self.gammas)
        betas = tuple(float(b) for b in self.betas)
        if len(gammas) != len(betas):
            raise AnsatzError(f"{len(gammas)} gammas but {len(betas)} betas")
        if not all(math.isfinite(v) for v in gammas + betas):
            raise AnsatzError("parameters must be finite")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "betas", betas)

    @property
    def p(self) -> int:
        return len(self.gammas)

    @classmethod
    def empty(cls) -> "ParameterSchedule":
        return cls((), ())

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)

    @classmethod
    def from_vector(cls, x) -> "ParameterSchedule":
        x = np.asarray(x, dtype=float)
        p = len(x) // 2
        return cls(tuple(x[:p]), tuple(x[p:]))

    def truncated(self, p: int) -> "ParameterSchedule":
        return ParameterSchedule(self.gammas[:p], self.betas[:p])

    def to_dict(self) -> dict:
        return {"p": self.p, "gammas": list(self.gammas), "betas": list(self.betas)}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSchedule":
        schedule = cls(tuple(data["gammas"]), tuple(data["betas"]))
        if "p" in data and int(data["p"]) != schedule.p:
            raise AnsatzError(f"declared p={data['p']} but {schedule.p} layers given")
        return schedule

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ParameterSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class AnsatzSpec:
    """Everything needed to prepare a QAOA state except the angles."""

    hamiltonian: Hamiltonian
    mode: str = "qrao"
    mixer: PauliAxis = PauliAxis.Z
    init: InitialState | None = None
    evolution: EvolutionMethod = field(default_factory=EvolutionMethod.exact)

    def __post_init__(self):
        if self.mode not in ("qrao", "standard"):
            raise AnsatzError(f"mode must be 'qrao' or 'standard', got {self.mode!r}")
        object.__setattr__(self, "mixer", PauliAxis(self.mixer))
        init = DEFAULT_INIT[self.mixer] if self.init is None else InitialState(self.init)
        object.__setattr__(self, "init", init)
        if self.mode == "standard" and not self.hamiltonian.is_diagonal():
            raise AnsatzError("standard mode needs a diagonal cost Hamiltonian")

    @classmethod
    def standard(cls, hamiltonian: Hamiltonian, evolution: EvolutionMethod | None = None) -> "AnsatzSpec":
        return cls(hamiltonian, "standard", PauliAxis.X, InitialState.PLUS_ALL, evolution or EvolutionMethod.exact())

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    def initial_state(self) -> StateVector:
        return prepare_basis(self.n_qubits, self.init)

    @cached_property
    def compiled(self) -> "CompiledAnsatz":
        return CompiledAnsatz(self)


@dataclass(frozen=True)
class AnsatzTemplate:
    """Recipe turning a graph into an ansatz (QRAO encoding or plain MaxCut)."""

    mode: str = "qrao"
    m: int = 3
    mixer: PauliAxis = PauliAxis.Z
    evolution: EvolutionMethod = field(default_factory=EvolutionMethod.exact)
    encoding_seed: int | None = None
    # shuffles the cost-term order (and so the Trotter product order) when set
    term_order_seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("qrao", "standard"):
            raise AnsatzError(f"mode must be 'qrao' or 'standard', got {self.mode!r}")
        object.__setattr__(self, "mixer", PauliAxis(self.mixer))

    @classmethod
    def standard(cls, evolution: EvolutionMethod | None = None) -> "AnsatzTemplate":
        return cls("standard", 1, PauliAxis.X, evolution or EvolutionMethod.exact())

    def encode(self, g: Graph) -> QracEncoding | None:
        if self.mode == "standard":
            return None
        return assign_qubits(g, self.m, self.encoding_seed)

    def build(self, g: Graph, enc: QracEncoding | None = None) -> AnsatzSpec:
        if self.mode == "standard":
            return AnsatzSpec.standard(self._ordered(maxcut_hamiltonian(g)), self.evolution)
        enc = enc if enc is not None else self.encode(g)
        return AnsatzSpec(self._ordered(relaxed_hamiltonian(g, enc)), "qrao", self.mixer, None, self.evolution)

    def _ordered(self, h: Hamiltonian) -> Hamiltonian:
        if self.term_order_seed is None:
            return h
        return h.reordered(make_rng(self.term_order_seed).permutation(len(h.terms)))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "m": self.m,
            "mixer": self.mixer.value,
            "evolution": str(self.evolution),
            "encoding_seed": self.encoding_seed,
            "term_order_seed": self.term_order_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnsatzTemplate":
        return cls(
            data.get("mode", "qrao"),
            int(data.get("m", 3)),
            PauliAxis(data.get("mixer", "Z")),
            EvolutionMethod.parse(data.get("evolution", "exact")),
            data.get("encoding_seed"),
            data.get("term_order_seed"),
        )


class CompiledAnsatz:
    """Precomputed operators for repeated evaluation of one ansatz.

    The mixer Hamiltonian is ``H_M = -sum_q P_q`` so that the default initial
    states for the X and Z mixers are its ground states; a layer applies
    ``exp(-i beta H_M) exp(-i gamma H_C)``.

    With exact cost evolution and a small register the state is propagated in the
    cost eigenbasis: each layer is a diagonal phase, one basis change into the mixer
    eigenbasis, a second diagonal phase and the basis change back.
    """

    def __init__(self, spec: AnsatzSpec):
        self.spec = spec
        self.n = spec.n_qubits
        h = spec.hamiltonian
        self._psi0 = spec.initial_state().amplitudes
        kind = spec.evolution.kind
        self._diagonal_cost = h.is_diagonal()
        if self._diagonal_cost:
            self._cost_diag = h.diagonal
            levels = np.round(self._cost_diag)
            # integer spectra (MaxCut) reuse a handful of phases
            if np.allclose(levels, self._cost_diag, atol=1e-12):
                self._cost_levels, self._cost_index = np.unique(levels, return_inverse=True)
            else:
                self._cost_levels = None
        elif kind == "grouped":
            self._blocks = pair_blocks(h)
        self._fast = kind == "exact" and not self._diagonal_cost and self.n <= DENSE_MIXER_CAP
        if self._fast:
            evals, evecs = h.spectrum
            self._evals = evals
            self._evecs = evecs
            if spec.mixer is PauliAxis.Z:
                w = np.eye(1 << self.n, dtype=np.complex128)
            else:
                w = _tensor_power(_MIXER_EIGENBASIS[spec.mixer], self.n)
            # to_mixer maps cost-eigenbasis coordinates to mixer-eigenbasis coordinates
            self._to_mixer = w.conj().T @ evecs
            self._to_cost = self._to_mixer.conj().T
            self._phi0 = evecs.conj().T @ self._psi0
        popcount = np.bitwise_count(np.arange(1 << self.n, dtype=np.uint64)).astype(float)
        # eigenvalue of H_M = -sum_q P_q on the mixer eigenvector indexed by b
        self._mixer_evals = 2 * popcount - self.n

    def _cost(self, amps: np.ndarray, gamma: float) -> np.ndarray:
        if self._diagonal_cost:
            if self._cost_levels is not None:
                return np.exp(-1j * gamma * self._cost_levels)[self._cost_index] * amps
            return np.exp(-1j * gamma * self._cost_diag) * amps
        kind = self.spec.evolution.kind
        if kind == "exact":
            return exact_propagate(amps, self.spec.hamiltonian, gamma)
        if kind == "trotter":
            return trotter_propagate(amps, self.spec.hamiltonian, gamma, self.spec.evolution.steps)
        return grouped_trotter_propagate(amps, self._blocks, self.n, gamma, self.spec.evolution.steps)

    def _mixer(self, amps: np.ndarray, beta: float) -> np.ndarray:
        if self.spec.mixer is PauliAxis.Z:
            return np.exp(-1j * beta * self._mixer_evals) * amps
        return apply_mixer_layer(amps, self.spec.mixer, -beta, self.n)

    def layer_amplitudes(self, params: ParameterSchedule, psi0: np.ndarray | None = None):
        """Yield the amplitudes before the first layer and after every layer."""
        if self._fast and psi0 is None:
            phi = self._phi0
            yield self._psi0.copy()
            for gamma, beta in zip(params.gammas, params.betas):
                chi = self._to_mixer @ (np.exp(-1j * gamma * self._evals) * phi)
                phi = self._to_cost @ (np.exp(-1j * beta * self._mixer_evals) * chi)
                yield self._evecs @ phi
            return
        amps = self._psi0 if psi0 is None else psi0
        yield amps.copy()
        for gamma, beta in zip(params.gammas, params.betas):
            amps = self._mixer(self._cost(amps, gamma), beta)
            yield amps

    def amplitudes(self, params: ParameterSchedule, psi0: np.ndarray | None = None) -> np.ndarray:
        if self._fast and psi0 is None and params.p > 0:
            return self._evecs @ self._final_phi(params)
        for amps in self.layer_amplitudes(params, psi0):
            pass
        return amps

    def _final_phi(self, params: ParameterSchedule) -> np.ndarray:
        phi = self._phi0
        for gamma, beta in zip(params.gammas, params.betas):
            chi = self._to_mixer @ (np.exp(-1j * gamma * self._evals) * phi)
            phi = self._to_cost @ (np.exp(-1j * beta * self._mixer_evals) * chi)
        return phi

    def energy(self, params: ParameterSchedule) -> float:
        if self._fast:
            phi = self._final_phi(params)
            return float(np.dot(self._evals, np.abs(phi) ** 2))
        amps = self.amplitudes(params)
        if self._diagonal_cost:
            return float(np.dot(self._cost_diag, np.abs(amps) ** 2))
        return expectation(self.spec.hamiltonian, StateVector(self.n, amps))


_MIXER_EIGENBASIS = {
    # columns: +1 eigenvector, then -1 eigenvector
    PauliAxis.X: np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2),
    PauliAxis.Y: np.array([[1, 1], [1j, -1j]], dtype=np.complex128) / math.sqrt(2),
}


def _tensor_power(mat: np.ndarray, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for _ in range(n):
        out = np.kron(mat, out)
    return out


def run_ansatz(spec: AnsatzSpec, params: ParameterSchedule, initial: StateVector | None = None) -> StateVector:
    """Prepare ``prod_l exp(-i beta_l H_M) exp(-i gamma_l H_C) |psi_0>``, layer 1 first."""
    psi0 = None
    if initial is not None:
        if initial.n_qubits != spec.n_qubits:
            raise SimulationError(f"initial state has {initial.n_qubits} qubits, ansatz {spec.n_qubits}")
        psi0 = initial.amplitudes
    return StateVector(spec.n_qubits, spec.compiled.amplitudes(params, psi0))


def layer_states(spec: AnsatzSpec, params: ParameterSchedule) -> list[StateVector]:
    """The initial state followed by the state after each of the ``p`` layers."""
    return [StateVector(spec.n_qubits, a) for a in spec.compiled.layer_amplitudes(params)]


def energy(spec: AnsatzSpec, params: ParameterSchedule, initial: StateVector | None = None) -> float:
    """Expectation of the cost Hamiltonian in the prepared state; lower is better."""
    if initial is not None:
        return expectation(spec.hamiltonian, run_ansatz(spec, params, initial))
    return spec.compiled.energy(params)
