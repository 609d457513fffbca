import math

import numpy as np
import pytest

from qrao.experiment import ENTROPY_COLUMNS, METRICS_COLUMNS, RowWriter, read_rows
from qrao.report import FIGURES, ReportError, aggregate, mean_se, write_report


def metric_row(iid, p, alpha_r, alpha_c, source="fixed", m=3, mode="qrao", mixer="Z", evolution="exact", n=10):
    row = {c: "0" for c in METRICS_COLUMNS}
    row.update(
        instance_id=iid, n_nodes=str(n), mode=mode, m=str(m), mixer=mixer, evolution=evolution,
        params_source=source, p=str(p), alpha_r=repr(alpha_r), alpha_c=repr(alpha_c),
        n_qubits_qrao="4", n_qubits_standard=str(n),
    )
    return row


def entropy_row(iid, p, layer, value, source="fixed"):
    return dict(instance_id=iid, mode="qrao", mixer="Z", evolution="exact", params_source=source,
                p=str(p), layer=str(layer), entropy=repr(value), unit="nats")


def test_mean_se():
    assert mean_se([2.0]) == (2.0, 0.0)
    mean, se = mean_se([1.0, 2.0, 4.0])
    assert mean == pytest.approx(7 / 3)
    assert se == pytest.approx(np.std([1, 2, 4], ddof=1) / math.sqrt(3))


def test_fig4b_groups_by_p_with_standard_error():
    rows = [metric_row(f"i{k}", p, 0.5 + 0.1 * k + p / 10, 0.6 + 0.05 * k) for k in range(3) for p in (1, 2)]
    header, table = aggregate(rows, [])["fig4b"]
    assert header == ["p", "alpha_r_mean", "alpha_r_se", "alpha_c_mean", "alpha_c_se", "n"]
    by_p = {r[0]: r for r in table}
    ar = [0.5 + 0.1 * k + 0.2 for k in range(3)]
    assert by_p["2"][1] == pytest.approx(np.mean(ar))
    assert by_p["2"][2] == pytest.approx(np.std(ar, ddof=1) / math.sqrt(3))
    assert by_p["2"][5] == 3


def test_numeric_sort_and_ratios():
    rows = []
    for p in (1, 2, 10):
        rows += [metric_row("a", p, 0.8, 0.9), metric_row("a", p, 1.0, 1.0, source="optimize")]
    tables = aggregate(rows, [])
    assert [r[0] for r in tables["fig4b"][1]] == ["1", "2", "10"]
    assert [r[1] for r in tables["fig4a"][1]] == pytest.approx([0.8] * 3)
    assert tables["figA8"][1] == []
    m2 = aggregate([{**r, "m": "2"} for r in rows], [])
    assert m2["fig4a"][1] == [] and len(m2["figA8"][1]) == 3


def test_entropy_tables():
    ent = [entropy_row("a", 2, layer, v) for layer, v in enumerate([0.0, 0.4, 0.3])]
    ent += [entropy_row("b", 2, layer, v) for layer, v in enumerate([0.0, 0.2, 0.5])]
    tables = aggregate([], ent)
    fig7 = {r[2]: r for r in tables["fig7"][1]}
    assert fig7["1"][3] == pytest.approx(0.3)
    (peak,) = tables["fig7_max"][1]
    assert peak[2] == pytest.approx(0.45)


def test_guards():
    with pytest.raises(ReportError):
        aggregate([metric_row("a", 1, 0.5, 0.5, m=3), metric_row("b", 1, 0.5, 0.5, m=2)], [])
    broken = metric_row("a", 1, 0.5, 0.5)
    del broken["alpha_c"]
    with pytest.raises(ReportError):
        aggregate([broken], [])


def test_empty_input_writes_header_only_files(tmp_path):
    metrics = tmp_path / "metrics.csv"
    RowWriter(metrics, METRICS_COLUMNS).close()
    entropy = tmp_path / "entropy.csv"
    RowWriter(entropy, ENTROPY_COLUMNS).close()
    paths = write_report(metrics, entropy, tmp_path / "report")
    assert [p.stem for p in paths] == list(FIGURES)
    for path in paths:
        lines = path.read_text().splitlines()
        assert len(lines) == 1 and lines[0]
        assert read_rows(path) == []
