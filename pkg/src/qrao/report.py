"""Figure-ready aggregations (mean and standard error) over metric and entropy CSVs."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .experiment import ENTROPY_COLUMNS, METRICS_COLUMNS, read_rows

FIGURES = ("fig2", "fig4a", "fig4b", "fig4c", "fig5", "fig6a", "fig6c", "fig7", "fig7_max", "figA8")


class ReportError(ValueError):
    pass


def mean_se(values) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(n)); the error is 0 for a single value."""
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def _check_columns(rows: list[dict], required, source: str) -> None:
    if rows:
        missing = [c for c in required if c not in rows[0]]
        if missing:
            raise ReportError(f"{source} lacks columns {missing}")


def _check_single_m(rows: list[dict]) -> None:
    ms = {r["m"] for r in rows if r["mode"] == "qrao"}
    if len(ms) > 1:
        raise ReportError(f"aggregation mixes QRAC codes m={sorted(ms)}")


def _group(rows, keys, values, *, numeric_keys=()) -> tuple[list[str], list[list]]:
    groups = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in keys)].append(r)

    def sort_key(k):
        return tuple(float(v) if name in numeric_keys else v for name, v in zip(keys, k))

    header = list(keys) + [c for v in values for c in (f"{v}_mean", f"{v}_se")] + ["n"]
    out = []
    for k in sorted(groups, key=sort_key):
        members = groups[k]
        row = list(k)
        for v in values:
            row.extend(mean_se([float(m[v]) for m in members]))
        row.append(len(members))
        out.append(row)
    return header, out


def _ratio_rows(rows: list[dict]) -> list[dict]:
    """Pair fixed-parameter rows with optimized rows of the same cell."""
    optimized = {}
    for r in rows:
        if r["params_source"] == "optimize":
            optimized[(r["instance_id"], r["mode"], r["mixer"], r["evolution"], r["p"])] = r
    out = []
    for r in rows:
        if r["params_source"] != "fixed":
            continue
        base = optimized.get((r["instance_id"], r["mode"], r["mixer"], r["evolution"], r["p"]))
        if base is None or float(base["alpha_r"]) == 0 or float(base["alpha_c"]) == 0:
            continue
        out.append(
            {
                "p": r["p"],
                "m": r["m"],
                "ratio_alpha_r": float(r["alpha_r"]) / float(base["alpha_r"]),
                "ratio_alpha_c": float(r["alpha_c"]) / float(base["alpha_c"]),
            }
        )
    return out


def aggregate(metrics: list[dict], entropy: list[dict]) -> dict[str, tuple[list[str], list[list]]]:
    """Every supported figure table; inputs are rows as read from the CSVs."""
    _check_columns(metrics, METRICS_COLUMNS, "metrics")
    _check_columns(entropy, ENTROPY_COLUMNS, "entropy")
    _check_single_m(metrics)
    qrao = [r for r in metrics if r["mode"] == "qrao"]
    m_value = int(qrao[0]["m"]) if qrao else 3
    alphas = ("alpha_r", "alpha_c")
    exact = [r for r in qrao if r["evolution"] == "exact"]
    fixed = [r for r in exact if r["params_source"] == "fixed"]
    ratios = _ratio_rows(exact)
    tables = {
        "fig2": _group([r for r in exact if r["params_source"] == "optimize"], ("mixer", "p"), alphas, numeric_keys=("p",)),
        "fig4b": _group(fixed, ("p",), alphas, numeric_keys=("p",)),
        "fig4c": _group(fixed, ("n_nodes", "p"), alphas, numeric_keys=("n_nodes", "p")),
        "fig5": _group(
            [r for r in qrao if r["params_source"] == "fixed"], ("evolution", "p"), alphas, numeric_keys=("p",)
        ),
        "fig6a": _group([r for r in metrics if r["evolution"] == "exact"], ("mode", "p"), ("alpha_c",), numeric_keys=("p",)),
    }
    ratio_table = _group(ratios, ("p",), ("ratio_alpha_r", "ratio_alpha_c"), numeric_keys=("p",))
    empty_ratio = (ratio_table[0], [])
    tables["fig4a"] = ratio_table if m_value == 3 else empty_ratio
    tables["figA8"] = ratio_table if m_value == 2 else empty_ratio

    per_instance = {}
    for r in metrics:
        per_instance.setdefault(r["instance_id"], r)
    tables["fig6c"] = _group(
        list(per_instance.values()), ("n_nodes",), ("n_qubits_qrao", "n_qubits_standard"), numeric_keys=("n_nodes",)
    )

    trajectories = [r for r in entropy if r["mode"] == "qrao" and r["evolution"] == "exact"]
    tables["fig7"] = _group(
        trajectories, ("params_source", "p", "layer"), ("entropy",), numeric_keys=("p", "layer")
    )
    peaks = defaultdict(float)
    for r in trajectories:
        key = (r["instance_id"], r["params_source"], r["p"])
        peaks[key] = max(peaks[key], float(r["entropy"]))
    tables["fig7_max"] = _group(
        [{"params_source": s, "p": p, "max_entropy": v} for (_, s, p), v in peaks.items()],
        ("params_source", "p"),
        ("max_entropy",),
        numeric_keys=("p",),
    )
    return tables


def write_report(metrics_path: str | Path, entropy_path: str | Path | None, out_dir: str | Path) -> list[Path]:
    metrics = read_rows(metrics_path)
    entropy = read_rows(entropy_path) if entropy_path is not None and Path(entropy_path).exists() else []
    tables = aggregate(metrics, entropy)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in FIGURES:
        header, rows = tables[name]
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        written.append(path)
    return written
