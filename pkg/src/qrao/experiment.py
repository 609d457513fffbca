"""Per-instance evaluation and the row formats shared by the CLI and the report step."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .encoding import QracEncoding, assign_qubits
from .graph import ClassicalExtrema, Graph, brute_force_extrema, cut_energy
from .pauli import extremal_eigenvalues
from .qaoa import AnsatzTemplate, ParameterSchedule, run_ansatz
from .rounding import alpha_c, approximation_ratio, entropy_trajectory, pauli_round_exact

LN2 = math.log(2)


@dataclass(frozen=True)
class MetricsRecord:
    instance_id: str
    n_nodes: int
    n_edges: int
    mode: str
    m: int
    mixer: str
    evolution: str
    params_source: str
    p: int
    alpha_r: float
    alpha_c: float
    e_qrao: float
    e_qaoa: float
    relaxed_e_min: float
    relaxed_e_max: float
    classical_e_min: float
    classical_e_max: float
    n_qubits_qrao: int
    n_qubits_standard: int
    n_ties: int
    gammas: str
    betas: str
    seed: int
    config_hash: str

    def __post_init__(self):
        if not (math.isfinite(self.alpha_r) and math.isfinite(self.alpha_c)):
            raise ValueError(f"non-finite approximation ratio for {self.instance_id} p={self.p}")

    def key(self) -> tuple:
        return (self.instance_id, self.mode, self.mixer, self.evolution, self.params_source, str(self.p))


METRICS_COLUMNS = tuple(f.name for f in fields(MetricsRecord))
ENTROPY_COLUMNS = ("instance_id", "mode", "mixer", "evolution", "params_source", "p", "layer", "entropy", "unit")


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_angles(values) -> str:
    return " ".join(repr(float(v)) for v in values)


@dataclass
class InstanceContext:
    """Quantities shared by every cell of one instance (encoding, extrema)."""

    instance_id: str
    graph: Graph
    classical: ClassicalExtrema
    encodings: dict

    @classmethod
    def build(cls, instance_id: str, graph: Graph) -> "InstanceContext":
        return cls(instance_id, graph, brute_force_extrema(graph), {})

    def encoding(self, m: int, seed: int | None) -> QracEncoding:
        key = (m, seed)
        if key not in self.encodings:
            self.encodings[key] = assign_qubits(self.graph, m, seed)
        return self.encodings[key]


def evaluate(
    ctx: InstanceContext,
    template: AnsatzTemplate,
    params: ParameterSchedule,
    params_source: str,
    seed: int,
    config_hash: str,
    qubit_m: int = 3,
) -> tuple[MetricsRecord, object]:
    """Prepare the ansatz state for one cell and score it.

    QRAO cells report alpha_r against the relaxed spectrum and alpha_c from the
    deterministic Pauli-rounded cut. Standard cells have no rounding step: both
    ratios use the expected cut energy. Returns the record and the ansatz spec.
    """
    g = ctx.graph
    ext = ctx.classical
    qrao_m = template.m if template.mode == "qrao" else qubit_m
    enc = ctx.encoding(qrao_m, template.encoding_seed)
    spec = template.build(g, enc if template.mode == "qrao" else None)
    psi = run_ansatz(spec, params)
    e_state = spec.compiled.energy(params)
    if template.mode == "qrao":
        relaxed_min, relaxed_max, _ = extremal_eigenvalues(spec.hamiltonian)
        rounded = pauli_round_exact(psi, enc)
        e_qaoa = cut_energy(g, rounded.cut)
        a_r = approximation_ratio(e_state, relaxed_min, relaxed_max)
        a_c = alpha_c(rounded, g, ext)
        ties = rounded.n_ties
    else:
        relaxed_min, relaxed_max = ext.e_min, ext.e_max
        e_qaoa = e_state
        a_r = a_c = approximation_ratio(e_state, ext.e_min, ext.e_max)
        ties = 0
    record = MetricsRecord(
        instance_id=ctx.instance_id,
        n_nodes=g.n_nodes,
        n_edges=g.n_edges,
        mode=template.mode,
        m=qrao_m,
        mixer=template.mixer.value,
        evolution=str(template.evolution),
        params_source=params_source,
        p=params.p,
        alpha_r=float(a_r),
        alpha_c=float(a_c),
        e_qrao=float(e_state),
        e_qaoa=float(e_qaoa),
        relaxed_e_min=float(relaxed_min),
        relaxed_e_max=float(relaxed_max),
        classical_e_min=float(ext.e_min),
        classical_e_max=float(ext.e_max),
        n_qubits_qrao=enc.n_qubits,
        n_qubits_standard=g.n_nodes,
        n_ties=ties,
        gammas=_format_angles(params.gammas),
        betas=_format_angles(params.betas),
        seed=seed,
        config_hash=config_hash,
    )
    return record, spec


def entropy_rows(
    record: MetricsRecord, spec, params: ParameterSchedule, permutations: int, seed: int, unit: str = "nats"
) -> list[dict]:
    if unit not in ("nats", "bits"):
        raise ValueError(f"entropy unit must be 'nats' or 'bits', got {unit!r}")
    trajectory = entropy_trajectory(spec, params, permutations, seed)
    scale = 1.0 if unit == "nats" else 1.0 / LN2
    return [
        {
            "instance_id": record.instance_id,
            "mode": record.mode,
            "mixer": record.mixer,
            "evolution": record.evolution,
            "params_source": record.params_source,
            "p": record.p,
            "layer": layer,
            "entropy": float(value * scale),
            "unit": unit,
        }
        for layer, value in enumerate(trajectory)
    ]


class RowWriter:
    """Append-only CSV writer that flushes after every row, so interrupted runs resume cleanly."""

    def __init__(self, path: str | Path, columns: tuple[str, ...]):
        self.path = Path(path)
        self.columns = columns
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        if not fresh:
            with open(self.path, newline="") as fh:
                header = next(csv.reader(fh), None)
            if tuple(header or ()) != columns:
                raise ValueError(f"{self.path} has an unexpected header")
        self._fh = open(self.path, "a", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        if fresh:
            self._writer.writerow(columns)
            self._fh.flush()

    def write(self, row: dict) -> None:
        self._writer.writerow([format_value(row[c]) for c in self.columns])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def record_row(record: MetricsRecord) -> dict:
    return asdict(record)


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def completed_keys(path: str | Path) -> set[tuple]:
    """Keys of complete metric rows already on disk; a torn final line is dropped."""
    path = Path(path)
    if not path.exists():
        return set()
    text = path.read_text()
    if text and not text.endswith("\n"):
        # a partial row from an interrupted write: cut it so appends stay well formed
        path.write_text(text[: text.rfind("\n") + 1])
    keys = set()
    for row in read_rows(path):
        if all(row.get(c) not in (None, "") for c in METRICS_COLUMNS):
            keys.add(tuple(row[c] for c in ("instance_id", "mode", "mixer", "evolution", "params_source", "p")))
    return keys
