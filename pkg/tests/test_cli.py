import json
import subprocess
import sys

import pytest

from msnp.cli import main
from msnp.data import load_trust_graph
from msnp.predictor import load_records
from msnp.simnet import default_sim_config, load_sim_config


def data_lines(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_discover_rows_per_seed(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = main(["discover", "--n", "50,100", "--models", "pull,push,prefpush", "--seeds", "5", "--out", str(out)])
    assert rc == 0
    lines = data_lines(out)
    assert len(lines) == 1 + 6 * 5
    assert lines[0].startswith("n_providers,model,seed,")
    assert "makespan_ms" in capsys.readouterr().out


def test_discover_summary_and_config(tmp_path):
    conf = tmp_path / "sim.conf"
    conf.write_text("rtt_ms = 40\n")
    out, summary = tmp_path / "r.csv", tmp_path / "s.csv"
    rc = main(["discover", "--n", "30", "--models", "pull,hybrid", "--seeds", "2", "--config", str(conf),
               "--out", str(out), "--summary", str(summary)])
    assert rc == 0
    assert len(data_lines(summary)) == 1 + 2
    assert "# rtt_ms = 40.000000" in summary.read_text()


def test_trust_two_scheme_rows(tmp_path):
    graph = tmp_path / "g.txt"
    assert main(["gen", "graph", "--n", "120", "--seed", "3", "--out", str(graph)]) == 0
    out = tmp_path / "t.json"
    assert main(["trust", "--graph", str(graph), "--schemes", "hef,af", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [r["scheme"] for r in doc["rows"]] == ["hef", "af"]
    assert doc["config"]["graph"] == str(graph)


def test_predict_four_cells(tmp_path):
    out = tmp_path / "p.csv"
    rc = main(["predict", "--table1", "--n", "100", "--fractions", "0.6,0.7,0.8,0.9", "--seeds", "20",
               "--out", str(out)])
    assert rc == 0
    assert len(data_lines(out)) == 1 + 4


def test_predict_from_files(tmp_path):
    records, seq = tmp_path / "r.csv", tmp_path / "s.csv"
    assert main(["gen", "records", "--n", "60", "--out", str(records)]) == 0
    assert len(load_records(records)) == 60
    assert main(["gen", "sequence", "--n", "50", "--out", str(seq)]) == 0
    rules = tmp_path / "rules.conf"
    rules.write_text("importance = CL,2\n")
    for flag, path in (("--records", records), ("--sequence", seq)):
        out = tmp_path / "out.csv"
        assert main(["predict", flag, str(path), "--fractions", "0.5", "--seeds", "1", "--rules", str(rules),
                     "--out", str(out)]) == 0
        assert len(data_lines(out)) == 2


def test_gen_config_round_trip(tmp_path):
    path = tmp_path / "d.conf"
    assert main(["gen", "config", "--out", str(path)]) == 0
    assert load_sim_config(path) == default_sim_config()
    graph = tmp_path / "g.txt"
    main(["gen", "graph", "--n", "60", "--out", str(graph)])
    assert len(load_trust_graph(graph)) > 0


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["discover", "--bogus"],
    ["discover", "--n", "x", "--out", "o.csv"],
    ["discover", "--models", "gossip", "--out", "o.csv"],
    ["trust", "--planted", "--schemes", "psychic", "--out", "o.json"],
    ["predict", "--out", "o.csv"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_data_errors(tmp_path):
    out = str(tmp_path / "o")
    assert main(["trust", "--graph", str(tmp_path / "missing.txt"), "--out", out]) == 2
    bad = tmp_path / "bad.conf"
    bad.write_text("warp_speed = 9\n")
    assert main(["discover", "--n", "5", "--config", str(bad), "--out", out]) == 2
    assert main(["predict", "--records", str(tmp_path / "none.csv"), "--out", out]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "discover" in capsys.readouterr().out


def test_reruns_byte_identical(tmp_path):
    runs = [
        ["discover", "--n", "40,80", "--models", "pull,push,prefpush,hybrid", "--seeds", "3"],
        ["predict", "--table1", "--n", "100", "--fractions", "0.6,0.9", "--seeds", "4"],
        ["trust", "--planted", "--users", "150", "--seed", "2"],
    ]
    for i, argv in enumerate(runs):
        a, b = tmp_path / f"{i}a", tmp_path / f"{i}b"
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.conf"
    proc = subprocess.run([sys.executable, "-m", "msnp", "gen", "config", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "msnp", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
