"""Command-line experiment driver: gen, encode, oracle, fixed-params, run, report."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .graph import Graph, brute_force_extrema, generate_random_regular
from .optimize import (
    FixedParameterTable,
    build_fixed_parameters,
    concentration_report,
    graph_fingerprint,
    optimize_layerwise,
    write_concentration_csv,
    derive_seed,
)
from .pauli import PauliAxis, extremal_eigenvalues
from .qaoa import AnsatzTemplate, ParameterSchedule
from .rng import PRNG_NAME
from .simulator import EvolutionMethod
from .experiment import (
    ENTROPY_COLUMNS,
    METRICS_COLUMNS,
    InstanceContext,
    RowWriter,
    completed_keys,
    entropy_rows,
    evaluate,
    read_rows,
    record_row,
)
from .encoding import assign_qubits, relaxed_hamiltonian
from .report import write_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

PARAM_SOURCES = ("optimize", "fixed", "explicit")
HASH_EXCLUDED = ("output_dir", "instances_dir", "workers")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    sizes: list[int] = field(default_factory=lambda: [10])
    instances_per_size: int = 1
    degree: int = 3
    m: int = 3
    modes: list[str] = field(default_factory=lambda: ["qrao"])
    mixers: list[str] = field(default_factory=lambda: ["Z"])
    evolutions: list[str] = field(default_factory=lambda: ["exact"])
    p_min: int = 1
    p_max: int = 1
    seed: int = 0
    restarts: int = 10
    budget: int = 5000
    output_dir: str = "out"
    instances_dir: str | None = None
    params_source: str = "optimize"
    fixed_table: str | None = None
    explicit_params: str | None = None
    entropy: bool = False
    entropy_permutations: int = 10
    entropy_unit: str = "nats"
    encoding_seed: int | None = None
    term_order_seed: int | None = None
    workers: int = 1

    def validate(self) -> None:
        if not self.sizes or any(n < 2 for n in self.sizes):
            raise ConfigError("sizes must be a nonempty list of integers >= 2")
        if self.instances_per_size < 0 or self.degree < 1:
            raise ConfigError("instances_per_size must be >= 0 and degree >= 1")
        if self.m not in (2, 3):
            raise ConfigError("m must be 2 or 3")
        for mode in self.modes:
            if mode not in ("qrao", "standard"):
                raise ConfigError(f"unknown mode {mode!r}")
        for mixer in self.mixers:
            if mixer not in ("X", "Y", "Z"):
                raise ConfigError(f"unknown mixer {mixer!r}")
        for evolution in self.evolutions:
            try:
                method = EvolutionMethod.parse(evolution)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad evolution {evolution!r}: {exc}") from exc
            if str(method) != evolution:
                raise ConfigError(f"evolution {evolution!r} should be written {str(method)!r}")
        if not 1 <= self.p_min <= self.p_max:
            raise ConfigError("need 1 <= p_min <= p_max")
        if self.restarts < 1 or self.budget < 1:
            raise ConfigError("restarts and budget must be positive")
        if self.params_source not in PARAM_SOURCES:
            raise ConfigError(f"params_source must be one of {PARAM_SOURCES}")
        if self.entropy_unit not in ("nats", "bits"):
            raise ConfigError("entropy_unit must be 'nats' or 'bits'")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def check_files(self) -> None:
        if self.params_source == "fixed":
            if not self.fixed_table or not Path(self.fixed_table).is_file():
                raise ConfigError(f"fixed table not found: {self.fixed_table}")
        if self.params_source == "explicit":
            if not self.explicit_params or not Path(self.explicit_params).is_file():
                raise ConfigError(f"explicit parameter file not found: {self.explicit_params}")

    @property
    def instance_path(self) -> Path:
        return Path(self.instances_dir) if self.instances_dir else Path(self.output_dir) / "instances"

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        # where outputs go and how many workers compute them do not change the results
        data = {k: v for k, v in self.to_dict().items() if k not in HASH_EXCLUDED}
        for key in ("fixed_table", "explicit_params"):
            # parameter files enter by content, so moving them keeps the hash
            if data[key] and Path(data[key]).is_file():
                data[key] = hashlib.sha256(Path(data[key]).read_bytes()).hexdigest()
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def instance_id(n: int, index: int) -> str:
    return f"n{n:03d}_i{index:03d}"


def load_instances(cfg: ExperimentConfig) -> list[tuple[str, Graph]]:
    manifest_path = cfg.instance_path / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"no instance manifest at {manifest_path}; run 'gen' first")
    manifest = json.loads(manifest_path.read_text())
    return [(e["id"], Graph.load(cfg.instance_path / e["file"])) for e in manifest["instances"]]


def cmd_gen(cfg: ExperimentConfig) -> dict:
    out = cfg.instance_path
    out.mkdir(parents=True, exist_ok=True)
    entries, errors = [], []
    for n in cfg.sizes:
        for i in range(cfg.instances_per_size):
            iid = instance_id(n, i)
            seed = derive_seed(cfg.seed, n, i)
            try:
                g = generate_random_regular(n, cfg.degree, seed)
            except ValueError as exc:
                errors.append({"id": iid, "n_nodes": n, "error": str(exc)})
                continue
            g.save(out / f"{iid}.json")
            entries.append({"id": iid, "file": f"{iid}.json", "n_nodes": n, "degree": cfg.degree, "seed": seed})
    manifest = {"config_hash": cfg.hash(), "prng": PRNG_NAME, "instances": entries, "errors": errors}
    _write_json(out / "manifest.json", manifest)
    return manifest


def cmd_encode(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    enc_dir = out / "encodings"
    enc_dir.mkdir(parents=True, exist_ok=True)
    summary = out / "qubits.csv"
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance_id", "n_nodes", "m", "n_qubits_qrao", "n_qubits_standard", "config_hash"])
        for iid, g in load_instances(cfg):
            enc = assign_qubits(g, cfg.m, cfg.encoding_seed)
            enc.save(enc_dir / f"{iid}.json")
            relaxed_hamiltonian(g, enc).save(enc_dir / f"{iid}.ham")
            writer.writerow([iid, g.n_nodes, cfg.m, enc.n_qubits, g.n_nodes, cfg.hash()])
    return summary


def cmd_oracle(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "oracle.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["instance_id", "n_nodes", "n_edges", "e_min", "e_max", "max_cut", "argmin_cut",
             "relaxed_e_min", "relaxed_e_max", "config_hash"]
        )
        for iid, g in load_instances(cfg):
            ext = brute_force_extrema(g)
            h = relaxed_hamiltonian(g, assign_qubits(g, cfg.m, cfg.encoding_seed))
            r_min, r_max, _ = extremal_eigenvalues(h)
            cut = "".join("0" if s > 0 else "1" for s in ext.argmin_cut)
            writer.writerow(
                [iid, g.n_nodes, g.n_edges, repr(float(ext.e_min)), repr(float(ext.e_max)), ext.max_cut_value, cut,
                 repr(float(r_min)), repr(float(r_max)), cfg.hash()]
            )
    return path


def _template(cfg: ExperimentConfig, mode: str, mixer: str, evolution: str) -> AnsatzTemplate:
    method = EvolutionMethod.parse(evolution)
    if mode == "standard":
        return AnsatzTemplate("standard", 1, PauliAxis.X, method, None, cfg.term_order_seed)
    return AnsatzTemplate("qrao", cfg.m, PauliAxis(mixer), method, cfg.encoding_seed, cfg.term_order_seed)


def cmd_fixed_params(cfg: ExperimentConfig) -> tuple[Path, Path]:
    instances = load_instances(cfg)
    if not instances:
        raise ConfigError("fixed-params needs at least one training instance")
    template = _template(cfg, cfg.modes[0], cfg.mixers[0], cfg.evolutions[0])
    table = build_fixed_parameters(
        [g for _, g in instances], cfg.p_max, template, cfg.seed, cfg.restarts, cfg.budget
    )
    table.provenance["config_hash"] = cfg.hash()
    table.provenance["instance_ids"] = [iid for iid, _ in instances]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "fixed_params.json"
    table.save(table_path)
    report_path = out / "concentration.csv"
    write_concentration_csv(concentration_report(table), report_path)
    return table_path, report_path


def _explicit_schedules(path: str) -> dict[int, ParameterSchedule]:
    data = json.loads(Path(path).read_text())
    if "schedules" in data:
        return {int(p): ParameterSchedule.from_dict(s) for p, s in data["schedules"].items()}
    schedule = ParameterSchedule.from_dict(data)
    return {schedule.p: schedule}


def _cell_schedules(cfg: ExperimentConfig, template: AnsatzTemplate, g: Graph) -> dict[int, ParameterSchedule]:
    ps = range(cfg.p_min, cfg.p_max + 1)
    if cfg.params_source == "optimize":
        spec = template.build(g)
        seed = derive_seed(cfg.seed, graph_fingerprint(g))
        results = optimize_layerwise(spec, cfg.p_max, cfg.restarts, seed, cfg.budget)
        return {p: results[p - 1].best_params for p in ps}
    if cfg.params_source == "fixed":
        table = FixedParameterTable.load(cfg.fixed_table)
        if template.mode == "qrao" and (table.m != template.m or table.mixer != template.mixer.value):
            raise ConfigError(
                f"fixed table is for m={table.m}, mixer={table.mixer}; cell wants m={template.m}, "
                f"mixer={template.mixer.value}"
            )
        return {p: table.schedule(p) for p in ps}
    schedules = _explicit_schedules(cfg.explicit_params)
    missing = [p for p in ps if p not in schedules]
    if missing:
        raise ConfigError(f"explicit parameters lack p={missing}")
    return {p: schedules[p] for p in ps}


def _cells(cfg: ExperimentConfig):
    for mode in cfg.modes:
        mixers = ["X"] if mode == "standard" else cfg.mixers
        for mixer in mixers:
            for evolution in cfg.evolutions:
                yield mode, mixer, evolution


def _run_instance(args) -> list[tuple[dict, list[dict]]]:
    """All missing rows of one instance, as (metrics row, entropy rows) pairs in cell order."""
    cfg, iid, g, done = args
    ctx = InstanceContext.build(iid, g)
    out = []
    for mode, mixer, evolution in _cells(cfg):
        template = _template(cfg, mode, mixer, evolution)
        keys = {p: (iid, mode, mixer, evolution, cfg.params_source, str(p)) for p in range(cfg.p_min, cfg.p_max + 1)}
        if all(k in done for k in keys.values()):
            continue
        schedules = _cell_schedules(cfg, template, g)
        for p, params in schedules.items():
            if keys[p] in done:
                continue
            record, spec = evaluate(ctx, template, params, cfg.params_source, cfg.seed, cfg.hash(), cfg.m)
            ent = []
            if cfg.entropy:
                ent_seed = derive_seed(cfg.seed, graph_fingerprint(g), p)
                ent = entropy_rows(record, spec, params, cfg.entropy_permutations, ent_seed, cfg.entropy_unit)
            out.append((record_row(record), ent))
    return out


def _drop_orphan_entropy(path: Path, done: set[tuple]) -> None:
    """Remove entropy rows whose metric row never made it to disk."""
    if not path.exists():
        return
    text = path.read_text()
    if text and not text.endswith("\n"):
        text = text[: text.rfind("\n") + 1]
        path.write_text(text)
    rows = read_rows(path)
    kept = [r for r in rows if (r["instance_id"], r["mode"], r["mixer"], r["evolution"], r["params_source"], r["p"]) in done]
    if len(kept) != len(rows):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=ENTROPY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(kept)


def cmd_run(cfg: ExperimentConfig) -> tuple[Path, Path]:
    cfg.check_files()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    entropy_path = out / "entropy.csv"
    instances = load_instances(cfg) if cfg.instance_path.joinpath("manifest.json").exists() else []
    done = completed_keys(metrics_path)
    _drop_orphan_entropy(entropy_path, done)
    jobs = [(cfg, iid, g, done) for iid, g in instances]
    with RowWriter(metrics_path, METRICS_COLUMNS) as metrics, RowWriter(entropy_path, ENTROPY_COLUMNS) as entropy:
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = pool.map(_run_instance, jobs)
                _write_results(results, metrics, entropy)
        else:
            _write_results(map(_run_instance, jobs), metrics, entropy)
    return metrics_path, entropy_path


def _write_results(results, metrics: RowWriter, entropy: RowWriter) -> None:
    for rows in results:
        for metric_row, ent in rows:
            # entropy first: a metric row on disk marks the whole cell as complete
            for r in ent:
                entropy.write(r)
            metrics.write(metric_row)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--sizes", type=int, nargs="+")
    parser.add_argument("--instances-per-size", type=int)
    parser.add_argument("--degree", type=int)
    parser.add_argument("--m", type=int)
    parser.add_argument("--modes", nargs="+")
    parser.add_argument("--mixers", nargs="+")
    parser.add_argument("--evolutions", nargs="+", help="exact, trotter:T or grouped:T")
    parser.add_argument("--p-min", type=int)
    parser.add_argument("--p-max", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--budget", type=int)
    parser.add_argument("--output-dir")
    parser.add_argument("--instances-dir")
    parser.add_argument("--params-source", choices=PARAM_SOURCES)
    parser.add_argument("--fixed-table")
    parser.add_argument("--explicit-params")
    parser.add_argument("--entropy", action="store_true", default=None)
    parser.add_argument("--entropy-permutations", type=int)
    parser.add_argument("--entropy-unit", choices=("nats", "bits"))
    parser.add_argument("--encoding-seed", type=int)
    parser.add_argument("--term-order-seed", type=int, help="shuffle cost-term (Trotter) order with this seed")
    parser.add_argument("--workers", type=int)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            data[f.name] = value
    try:
        cfg = ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrao", description="QAOA over quantum relaxations of MaxCut")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "generate random regular instances and a manifest"),
        ("encode", "assign QRAC slots and write relaxed Hamiltonians"),
        ("oracle", "brute-force classical and relaxed extrema per instance"),
        ("fixed-params", "build the averaged fixed-parameter table"),
        ("run", "evaluate instances and write metrics and entropy CSVs"),
    ):
        _add_config_flags(sub.add_parser(name, help=help_text))
    rep = sub.add_parser("report", help="aggregate metric CSVs into per-figure tables")
    rep.add_argument("--metrics", required=True)
    rep.add_argument("--entropy")
    rep.add_argument("--output-dir", required=True)
    return parser


COMMANDS = {
    "gen": cmd_gen,
    "encode": cmd_encode,
    "oracle": cmd_oracle,
    "fixed-params": cmd_fixed_params,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            if not Path(args.metrics).is_file():
                raise ConfigError(f"metrics file not found: {args.metrics}")
            for path in write_report(args.metrics, args.entropy, args.output_dir):
                print(path)
            return EXIT_OK
        cfg = build_config(args)
        result = COMMANDS[args.command](cfg)
        if isinstance(result, dict):
            print(f"{len(result['instances'])} instances, {len(result['errors'])} errors")
        else:
            for path in result if isinstance(result, tuple) else (result,):
                print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
