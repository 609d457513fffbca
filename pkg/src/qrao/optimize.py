"""Multi-start Nelder-Mead angle optimization and the fixed-parameter protocol."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .graph import Graph
from .qaoa import AnsatzSpec, AnsatzTemplate, ParameterSchedule
from .rng import PRNG_NAME, make_rng
from .pauli import PauliAxis
from .simulator import InitialState, pair_blocks

GAMMA_BOX = (0.0, math.pi)
BETA_BOX = (0.0, math.pi / 2)
BETA_PERIOD = math.pi
FATOL = 1e-6
XATOL = 1e-5
SIMPLEX_STEP = 0.1
DEFAULT_RESTARTS = 10
DEFAULT_BUDGET = 5000


class OptimizationError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizationResult:
    best_params: ParameterSchedule
    best_energy: float
    evaluations: int
    trace: tuple[tuple[ParameterSchedule, float], ...]


class _BudgetExhausted(Exception):
    pass


class _Objective:
    """Counts evaluations, enforces the budget and records every improvement."""

    def __init__(self, spec: AnsatzSpec, budget: int):
        self.spec = spec
        self.budget = budget
        self.calls = 0
        self.best = math.inf
        self.best_x: np.ndarray | None = None
        self.trace: list[tuple[ParameterSchedule, float]] = []

    def __call__(self, x: np.ndarray) -> float:
        if self.calls >= self.budget:
            raise _BudgetExhausted
        self.calls += 1
        params = ParameterSchedule.from_vector(x)
        value = self.spec.compiled.energy(params)
        if value < self.best:
            self.best = value
            self.best_x = np.array(x, dtype=float)
            self.trace.append((params, value))
        return value


def interpolate_schedule(schedule: ParameterSchedule) -> ParameterSchedule:
    """Linear interpolation of a depth-``p`` schedule onto ``p + 1`` layers."""
    p = schedule.p
    if p == 0:
        raise OptimizationError("cannot interpolate an empty schedule")

    def interp(values):
        padded = (0.0,) + tuple(values) + (0.0,)
        return tuple((i / p) * padded[i] + ((p - i) / p) * padded[i + 1] for i in range(p + 1))

    return ParameterSchedule(interp(schedule.gammas), interp(schedule.betas))


def _same_parity_integers(values: np.ndarray) -> bool:
    rounded = np.round(values)
    if not np.allclose(rounded, values, atol=1e-9):
        return False
    parity = np.mod(rounded, 2)
    return bool(np.all(parity == parity[0]))


def cost_period(spec: AnsatzSpec) -> float | None:
    """Smallest known shift of every gamma that leaves the prepared state unchanged up to phase."""
    h = spec.hamiltonian
    kind = spec.evolution.kind
    steps = spec.evolution.steps
    if h.is_diagonal():
        return math.pi if _same_parity_integers(h.diagonal) else None
    if kind == "exact":
        if h.n_qubits > 12:
            return None
        return math.pi if _same_parity_integers(h.spectrum[0]) else None
    if kind == "trotter":
        coeffs = np.array([c for c, _ in h.terms])
        return steps * math.pi if np.allclose(coeffs, np.round(coeffs)) else None
    blocks = pair_blocks(h)
    return steps * math.pi if all(_same_parity_integers(b.evals) for b in blocks) else None


def _wrap(value: float, period: float, low: float) -> float:
    return low + (value - low) % period


def time_reversal_symmetric(spec: AnsatzSpec) -> bool:
    """True when complex conjugation maps the ansatz at (gamma, beta) onto (-gamma, -beta).

    That needs a real cost Hamiltonian (no term with an odd number of Y factors), a
    real mixer and a real initial state.
    """
    if spec.mixer is PauliAxis.Y or spec.init is InitialState.MINUS_I_ALL:
        return False
    return all(term.n_y % 2 == 0 for _, term in spec.hamiltonian.terms)


def canonicalize(params: ParameterSchedule, spec: AnsatzSpec) -> ParameterSchedule:
    """Pick one representative among angle vectors that prepare the same energy.

    Betas fold into ``[-pi/4, 3pi/4)`` (period pi, centred on the sampling box);
    gammas fold only when the cost layer has a known period. When the ansatz is
    time-reversal symmetric the sign is fixed so that the first gamma lies in the
    lower half of its window (or is non-negative when there is no gamma period).
    """
    period = cost_period(spec)
    gamma_low = None if period is None else sum(GAMMA_BOX) / 2 - period / 2
    beta_low = sum(BETA_BOX) / 2 - BETA_PERIOD / 2

    def fold(gammas, betas):
        betas = tuple(_wrap(b, BETA_PERIOD, beta_low) for b in betas)
        if period is not None:
            gammas = tuple(_wrap(g, period, gamma_low) for g in gammas)
        return gammas, betas

    gammas, betas = fold(params.gammas, params.betas)
    if gammas and time_reversal_symmetric(spec):
        lead = gammas[0] - gamma_low if period is not None else gammas[0]
        flip = lead > period / 2 if period is not None else lead < 0
        if flip:
            gammas, betas = fold(tuple(-g for g in gammas), tuple(-b for b in betas))
    return ParameterSchedule(gammas, betas)


def _random_start(rng: np.random.Generator, p: int) -> np.ndarray:
    gammas = rng.uniform(*GAMMA_BOX, size=p)
    betas = rng.uniform(*BETA_BOX, size=p)
    return np.concatenate([gammas, betas])


def optimize_params(
    spec: AnsatzSpec,
    p: int,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    warm_start: ParameterSchedule | None = None,
) -> OptimizationResult:
    """Minimize the ansatz energy over ``2p`` angles.

    Each restart runs Nelder-Mead for at most ``budget`` energy evaluations. The
    first restart starts from ``warm_start`` when given, the rest from uniform
    draws in the sampling box, every second one reflected through the origin.
    Without time-reversal symmetry the reflected region holds a distinct basin
    that the box alone would rarely reach.
    """
    if budget < 1:
        raise OptimizationError("budget must be at least one evaluation")
    if restarts < 1:
        raise OptimizationError("need at least one restart")
    if p < 1:
        raise OptimizationError("p must be positive")
    if warm_start is not None and warm_start.p != p:
        raise OptimizationError(f"warm start has p={warm_start.p}, expected {p}")
    rng = make_rng(seed)
    starts = [(-1) ** i * _random_start(rng, p) for i in range(restarts)]
    if warm_start is not None:
        starts[0] = warm_start.to_vector()

    best: _Objective | None = None
    evaluations = 0
    trace: list[tuple[ParameterSchedule, float]] = []
    for x0 in starts:
        objective = _Objective(spec, budget)
        simplex = np.vstack([x0, x0 + SIMPLEX_STEP * np.eye(len(x0))])
        try:
            minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={"maxfev": budget, "xatol": XATOL, "fatol": FATOL, "initial_simplex": simplex},
            )
        except _BudgetExhausted:
            pass
        evaluations += objective.calls
        if best is None or objective.best < best.best:
            best = objective
            # keep the overall trace monotone: only record restarts that improve on the incumbent
            trace.extend(objective.trace if not trace else [t for t in objective.trace if t[1] < trace[-1][1]])
    params = canonicalize(ParameterSchedule.from_vector(best.best_x), spec)
    return OptimizationResult(params, float(best.best), evaluations, tuple(trace))


def optimize_layerwise(
    spec: AnsatzSpec,
    p_max: int,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> list[OptimizationResult]:
    """Optimize ``p = 1..p_max``, warm-starting each depth from the interpolated previous optimum."""
    results = []
    previous = None
    for p in range(1, p_max + 1):
        warm = interpolate_schedule(previous) if previous is not None else None
        result = optimize_params(spec, p, restarts, derive_seed(seed, p), budget, warm)
        results.append(result)
        previous = result.best_params
    return results


def derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(x) for x in parts]).generate_state(1)[0])


def graph_fingerprint(g: Graph) -> int:
    digest = hashlib.sha256(json.dumps(g.to_dict(), sort_keys=True).encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class FixedParameterTable:
    """Instance-averaged schedules for one (m, mixer, evolution) setting."""

    m: int
    mixer: str
    mode: str
    evolution: str
    schedules: dict[int, ParameterSchedule]
    per_instance: dict[int, list[ParameterSchedule]] = field(default_factory=dict)
    per_instance_energy: dict[int, list[float]] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def p_values(self) -> list[int]:
        return sorted(self.schedules)

    def schedule(self, p: int) -> ParameterSchedule:
        if p not in self.schedules:
            raise OptimizationError(f"fixed table has no schedule for p={p}")
        return self.schedules[p]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "mixer": self.mixer,
            "mode": self.mode,
            "evolution": self.evolution,
            "schedules": {str(p): s.to_dict() for p, s in sorted(self.schedules.items())},
            "per_instance": {
                str(p): [s.to_dict() for s in rows] for p, rows in sorted(self.per_instance.items())
            },
            "per_instance_energy": {str(p): rows for p, rows in sorted(self.per_instance_energy.items())},
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FixedParameterTable":
        return cls(
            m=int(data["m"]),
            mixer=data["mixer"],
            mode=data.get("mode", "qrao"),
            evolution=data.get("evolution", "exact"),
            schedules={int(p): ParameterSchedule.from_dict(s) for p, s in data["schedules"].items()},
            per_instance={
                int(p): [ParameterSchedule.from_dict(s) for s in rows]
                for p, rows in data.get("per_instance", {}).items()
            },
            per_instance_energy={int(p): list(rows) for p, rows in data.get("per_instance_energy", {}).items()},
            provenance=data.get("provenance", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FixedParameterTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def average_schedules(schedules: list[ParameterSchedule]) -> ParameterSchedule:
    if not schedules:
        raise OptimizationError("nothing to average")
    return ParameterSchedule.from_vector(np.mean([s.to_vector() for s in schedules], axis=0))


def _medoid(specs: list[AnsatzSpec], candidates: list[ParameterSchedule], weights: np.ndarray) -> int:
    """Index of the candidate schedule with the lowest mean per-edge energy over all instances."""
    scores = [
        float(np.mean([spec.compiled.energy(c) * w for spec, w in zip(specs, weights)])) for c in candidates
    ]
    return int(np.argmin(scores))


def build_fixed_parameters(
    instances: list[Graph],
    p_max: int,
    template: AnsatzTemplate,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    budget: int = DEFAULT_BUDGET,
) -> FixedParameterTable:
    """Optimize every training instance for ``p = 1..p_max`` and average the optima.

    Per depth, every instance is first optimized on its own (multi-start, warm
    started from its aligned ``p - 1`` schedule). The landscape has several basins
    that are not related by an exact symmetry, so independent optima can sit on
    different branches; before averaging, the per-instance optimum that does best
    across the whole training set is taken as reference and every instance is
    re-optimized locally from it. The aligned optima are averaged and kept for the
    concentration report.

    Seeds are derived from ``seed`` and the graph itself, so duplicated instances
    reproduce identical optima.
    """
    if not instances:
        raise OptimizationError("need at least one training instance")
    if p_max < 1:
        raise OptimizationError("p_max must be positive")
    specs = [template.build(g) for g in instances]
    weights = np.array([1.0 / max(g.n_edges, 1) for g in instances])
    instance_seeds = [derive_seed(seed, graph_fingerprint(g)) for g in instances]
    per_instance: dict[int, list[ParameterSchedule]] = {}
    energies: dict[int, list[float]] = {}
    previous: list[ParameterSchedule | None] = [None] * len(instances)
    for p in range(1, p_max + 1):
        raw = []
        for k, spec in enumerate(specs):
            warm = interpolate_schedule(previous[k]) if previous[k] is not None else None
            raw.append(optimize_params(spec, p, restarts, derive_seed(instance_seeds[k], p), budget, warm))
        reference = raw[_medoid(specs, [r.best_params for r in raw], weights)].best_params
        aligned = [optimize_params(spec, p, 1, 0, budget, reference) for spec in specs]
        per_instance[p] = [r.best_params for r in aligned]
        energies[p] = [r.best_energy for r in aligned]
        previous = per_instance[p]
    schedules = {p: average_schedules(rows) for p, rows in per_instance.items()}
    provenance = {
        "seed": seed,
        "prng": PRNG_NAME,
        "n_instances": len(instances),
        "sizes": sorted({g.n_nodes for g in instances}),
        "instance_fingerprints": [graph_fingerprint(g) for g in instances],
        "optimizer": {
            "method": "Nelder-Mead",
            "restarts": restarts,
            "budget_per_restart": budget,
            "fatol": FATOL,
            "xatol": XATOL,
            "gamma_box": list(GAMMA_BOX),
            "beta_box": list(BETA_BOX),
            "alignment": "medoid reference, local re-optimization",
        },
        "template": template.to_dict(),
    }
    return FixedParameterTable(
        m=template.m,
        mixer=template.mixer.value,
        mode=template.mode,
        evolution=str(template.evolution),
        schedules=schedules,
        per_instance=per_instance,
        per_instance_energy=energies,
        provenance=provenance,
    )


CONCENTRATION_COLUMNS = ("p", "layer", "which", "mean", "std", "min", "max", "n")


def concentration_report(table: FixedParameterTable) -> list[dict]:
    """Spread of the per-instance optima, one row per (p, layer, gamma/beta)."""
    if not table.per_instance:
        raise OptimizationError("table was built without per-instance optima")
    rows = []
    for p in sorted(table.per_instance):
        schedules = table.per_instance[p]
        if not schedules:
            raise OptimizationError(f"no per-instance optima recorded for p={p}")
        for which in ("gamma", "beta"):
            values = np.array([s.gammas if which == "gamma" else s.betas for s in schedules])
            for layer in range(p):
                col = values[:, layer]
                rows.append(
                    {
                        "p": p,
                        "layer": layer + 1,
                        "which": which,
                        "mean": float(col.mean()),
                        "std": float(col.std()),
                        "min": float(col.min()),
                        "max": float(col.max()),
                        "n": len(col),
                    }
                )
    return rows


def write_concentration_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CONCENTRATION_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
