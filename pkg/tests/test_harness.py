import json

import pytest

from msnp.data import TABLE1, TrustGraph, load_sequence_dataset, planted_trust_graph, sequence_fixture_path
from msnp.harness import (
    ROW_FIELDS,
    ExperimentReport,
    accuracy_of,
    best_model_per_n,
    exp_discovery_sweep,
    exp_prediction_curve,
    exp_trust_comparison,
    parse_seeds,
)
from msnp.simnet import SimConfig
from msnp.trust import PUBLIC_SCHEMES, Scheme

N_VALUES = [50, 100, 200, 300, 400, 500]
MODELS = ["pull", "push", "prefpush"]


@pytest.fixture(scope="module")
def sweep():
    return exp_discovery_sweep(SimConfig(), N_VALUES, MODELS, seeds=range(3))


def test_sweep_row_count(sweep):
    assert len(sweep.rows) == 18
    assert len(sweep.raw_rows) == 18 * 3
    assert [(r["n_providers"], r["model"]) for r in sweep.rows] == [(n, m) for n in N_VALUES for m in MODELS]


def test_sweep_crossover(sweep):
    best = best_model_per_n(sweep)
    assert best[50] == "pull"
    assert all(best[n] == "prefpush" for n in N_VALUES[1:])


def test_sweep_rerun_identical(sweep, tmp_path):
    again = exp_discovery_sweep(SimConfig(), N_VALUES, MODELS, seeds=range(3))
    assert again.rows == sweep.rows
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    sweep.write_csv(a)
    again.write_csv(b)
    assert a.read_bytes() == b.read_bytes()


def test_sweep_parallel_matches_serial(monkeypatch):
    serial = exp_discovery_sweep(SimConfig(), [20, 60], ["pull", "hybrid"], seeds=[0, 1])
    monkeypatch.setenv("MSNP_SIM_THREADS", "2")
    parallel = exp_discovery_sweep(SimConfig(), [20, 60], ["pull", "hybrid"], seeds=[0, 1])
    assert parallel.rows == serial.rows and parallel.raw_rows == serial.raw_rows


def test_sweep_errors():
    with pytest.raises(ValueError):
        exp_discovery_sweep(SimConfig(), [], MODELS)


def test_csv_header_echoes_config(sweep, tmp_path):
    path = tmp_path / "s.csv"
    sweep.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# experiment = discovery_sweep"
    assert "# rtt_ms = 20.000000" in lines
    assert "# seeds = 0,1,2" in lines
    header = next(l for l in lines if not l.startswith("#"))
    assert header.split(",") == list(ROW_FIELDS["discovery_sweep"])


def test_report_schema_enforced():
    with pytest.raises(ValueError):
        ExperimentReport("prediction_curve", [{"n_records": 1}])


def test_prediction_curve_cells():
    report = exp_prediction_curve(TABLE1, [0.6, 0.7, 0.8, 0.9], seeds=range(20), n_values=[100])
    assert len(report.rows) == 4
    assert 0.75 <= report.rows[0]["accuracy_mean"] <= 0.92
    assert all(r["seeds"] == 20 for r in report.rows)


def test_prediction_curve_boundary():
    report = exp_prediction_curve(TABLE1, [0.99], seeds=range(5), n_values=[100])
    (row,) = report.rows
    # one test record per seed, so each trial scores 0 or 1
    assert row["accuracy_mean"] * 5 == pytest.approx(round(row["accuracy_mean"] * 5))
    with pytest.raises(ValueError):
        exp_prediction_curve(TABLE1, [1.0], seeds=[0])


def test_sequence_fixture_curve():
    records = load_sequence_dataset(sequence_fixture_path())
    (row,) = exp_prediction_curve(records, [0.3], seeds=[0]).rows
    assert row["accuracy_mean"] >= 0.95
    assert row["n_records"] == len(records)


@pytest.fixture(scope="module")
def planted_report():
    graph, _, _ = planted_trust_graph(n_users=240, seed=1)
    return exp_trust_comparison(graph)


def test_trust_comparison_rows(planted_report):
    assert [r["scheme"] for r in planted_report.rows] == [s.value for s in Scheme]
    for row in planted_report.rows:
        assert 0 <= row["correct"] <= row["comparable"]


def test_trust_comparison_transaction_costs(planted_report):
    rows = {r["scheme"]: r for r in planted_report.rows}
    assert rows["hef"]["mean_transactions"] == 1.0
    assert rows["msf"]["mean_transactions"] == 1.0
    public = {rows[s.value]["mean_transactions"] for s in PUBLIC_SCHEMES}
    assert len(public) == 1  # every public scheme asks the same proximal set


def test_trust_comparison_proposed_beats_naive(planted_report):
    assert accuracy_of(planted_report, "proposed") > accuracy_of(planted_report, "naive")


def test_trust_comparison_na_row():
    # a one-way ring plus shared targets: no mutual friendships, so friend schemes never apply
    edges = [(f"u{i}", f"t{j}", 0.8) for i in range(4) for j in range(3)]
    edges += [(f"u{i}", f"u{(i + 1) % 4}", 0.6) for i in range(4)]
    report = exp_trust_comparison(TrustGraph.from_edges(edges), schemes=["af", "naive"], min_ratings=3)
    af, naive = report.rows
    assert af["accuracy"] is None and af["comparable"] == 0
    assert naive["comparable"] > 0
    assert '"accuracy": null' in report.to_json()
    doc = json.loads(report.to_json())
    assert doc["config"]["min_ratings"] == 3


def test_trust_comparison_empty_graph():
    with pytest.raises(ValueError):
        exp_trust_comparison(TrustGraph.from_edges([("a", "b", 0.8)]))


def test_parse_seeds():
    assert parse_seeds("3") == (0, 1, 2)
    assert parse_seeds("4,9") == (4, 9)
    with pytest.raises(ValueError):
        parse_seeds("0")
