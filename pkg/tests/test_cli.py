import json

import numpy as np
import pytest

from bpcluster.cli import main
from bpcluster.graph import Graph, format_graph
from bpcluster.network import format_network

from conftest import random_network, random_tree


@pytest.fixture
def files(tmp_path):
    assert main(["lattice", "--L", "4", "--out", str(tmp_path / "t4.txt")]) == 0
    assert main(["ising-network", "--L", "4", "--beta", "0.3", "--out", str(tmp_path / "n.txt")]) == 0
    tree = random_network(random_tree(20, np.random.default_rng(3)), 2, np.random.default_rng(4))
    (tmp_path / "tree.txt").write_text(format_network(tree))
    return tmp_path


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_enumerate_then_cache_hit(files, capsys):
    args = ["enumerate", "--graph", str(files / "t4.txt"), "--max-weight", "8", "--cache", str(files / "c")]
    assert main(args) == 0
    first = _json(capsys)
    assert first["loops"] == 1184 and first["clusters"] == 1352 and not first["cache_hit"]
    assert main(args) == 0
    assert _json(capsys)["cache_hit"]


def test_tree_bp_equals_exact(files, capsys):
    net = str(files / "tree.txt")
    assert main(["contract", "--network", net, "--mode", "exact"]) == 0
    exact = _json(capsys)["log_magnitude"]
    assert main(["contract", "--network", net, "--mode", "bp", "--tol", "1e-13"]) == 0
    out = _json(capsys)
    assert abs(out["log_magnitude"] - exact) < 1e-10 and out["bp"]["converged"]


def test_expand_matches_oracle(files, capsys):
    out = files / "o"
    code = main(["expand", "--network", str(files / "n.txt"), "--max-weight", "8", "--tol", "1e-12",
                 "--loop-series", "--out", str(out)])
    assert code == 0
    lines = (out / "expansion.csv").read_text().splitlines()
    assert lines[0].startswith("# bpcluster ")
    last = lines[-1].split(",")
    exact = 12.785523325713678
    bp_err = abs(-float(last[1]) - exact)
    assert abs(-float(last[2]) - exact) < bp_err / 10
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["subcommand"] == "expand" and cfg["params"]["max_weight"] == 8


def test_expand_byte_identical_and_cache_neutral(files, capsys):
    base = ["expand", "--network", str(files / "n.txt"), "--max-weight", "6", "--tol", "1e-12"]
    assert main(base) == 0
    cold = capsys.readouterr().out
    assert main(base + ["--cache", str(files / "c2")]) == 0
    capsys.readouterr()
    assert main(base + ["--cache", str(files / "c2"), "--threads", "3"]) == 0
    warm = capsys.readouterr().out
    assert cold.splitlines()[1:] == warm.splitlines()[1:]
    assert main(base) == 0
    assert capsys.readouterr().out == cold


def test_cluster_mode(files, capsys):
    assert main(["contract", "--network", str(files / "n.txt"), "--mode", "cluster",
                 "--max-weight", "8", "--tol", "1e-12"]) == 0
    assert abs(_json(capsys)["free_energy"] - (-12.790826412062229)) < 1e-9


def test_exit_codes(files, capsys, monkeypatch):
    net = str(files / "n.txt")
    assert main(["contract", "--network", net, "--mode", "bp", "--max-iters", "3"]) == 4
    assert main(["contract", "--network", str(files / "missing.txt")]) == 3
    assert main(["contract", "--network", net, "--budget", "4"]) == 5
    assert main(["contract"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["contract", "--network", net, "--damping", "1.5", "--mode", "bp"]) == 2
    (files / "bad.txt").write_text("vertices: 2\nedge 0 0\n")
    assert main(["enumerate", "--graph", str(files / "bad.txt"), "--max-weight", "4", "--cache", str(files)]) == 3
    monkeypatch.setenv("BPCLUSTER_MAX_ITERS", "3")
    assert main(["contract", "--network", net, "--mode", "bp"]) == 4
    assert main(["contract", "--network", net, "--mode", "bp", "--max-iters", "1000"]) == 0


def test_ising_benchmark_outputs(tmp_path):
    out = tmp_path / "bench"
    args = ["ising-benchmark", "--L", "5", "--beta-min", "0.2", "--beta-max", "0.4", "--beta-steps", "3",
            "--max-weight", "6", "--out", str(out), "--diagnostics"]
    assert main(args) == 0
    for name in ("benchmark.csv", "loops.csv", "diagnostics.csv", "config.json"):
        assert (out / name).exists()
    bench = (out / "benchmark.csv").read_text()
    # cutoffs 0, 4, 5 (wrap-around loops on the 5x5 torus) and 6, for three betas
    assert len(bench.splitlines()) == 2 + 3 * 4
    diag = (out / "diagnostics.csv").read_text()
    assert "fixed_point" in diag and "response" in diag
    again = tmp_path / "again"
    assert main(args[:-3] + ["--out", str(again), "--diagnostics"]) == 0
    assert (again / "benchmark.csv").read_text() == bench
    assert main(["ising-benchmark", "--L", "2", "--out", str(out)]) == 2
    assert main(["ising-benchmark", "--L", "x", "--out", str(out)]) == 2
