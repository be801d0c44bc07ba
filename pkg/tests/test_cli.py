import csv
from pathlib import Path

import numpy as np
import pytest

from progrecov.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, RESULT_HEADER, SUMMARY_HEADER, main
from progrecov.scenlab import read_fixture
from progrecov.topofile import load_topology

ROOT = Path(__file__).resolve().parents[1]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def motivating(tmp_path):
    path = tmp_path / "motivating.net"
    path.write_text(read_fixture("motivating.net"))
    return path


def test_solve_motivating(tmp_path, motivating):
    assert main(["solve", "--topology", str(motivating), "--algo", "ratio,dpopt", "--out", str(tmp_path)]) == EXIT_OK
    out = rows(tmp_path / "results.csv")
    assert list(out[0].keys()) == RESULT_HEADER
    by_algo = {r["algo"]: r for r in out}
    assert len(out) == 2
    assert by_algo["dpopt"]["total_utility"] == "13"
    assert by_algo["ratio"]["total_utility"] == "12"
    assert by_algo["dpopt"]["ratio_to_opt"] == "1.000000"


def test_repeated_random_is_identical(tmp_path):
    args = ["solve", "--gen", "gnp:n=8,p=0.2", "--seed", "7", "--algo", "random,random", "--seed", "7", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    a, b = rows(tmp_path / "results.csv")
    strip = lambda r: {k: v for k, v in r.items() if k != "elapsed_s"}
    assert strip(a) == strip(b)


def test_ibm_ratio_share_drops_when_adversarial(tmp_path):
    def share(spec):
        assert main(["solve", "--gen", spec, "--algo", "ratio", "--results", "r.csv", "--out", str(tmp_path)]) == EXIT_OK
        (row,) = rows(tmp_path / "r.csv")
        return float(row["ratio_to_opt"])

    assert share("ibm:adversarial=1") < share("ibm")


def test_byte_identical_reruns(tmp_path):
    args = ["solve", "--gen", "gnp:n=7", "--seed", "1", "--seed", "2", "--algo", "ratio,random,dpopt,brute", "--no-timing", "--plans"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    assert "NA" in (tmp_path / "a" / "results.csv").read_text()


def test_generate_round_trips(tmp_path):
    assert main(["generate", "--gen", "gnp:n=9,p=0.3,x=2", "--seed", "4", "--out", str(tmp_path)]) == EXIT_OK
    (path,) = tmp_path.glob("*.net")
    s = load_topology(path)
    assert s.network.n == 12 and "C" in s.network.names


def test_dp_beyond_cap_writes_na_row(tmp_path, capsys):
    assert main(["solve", "--gen", "gnp:n=30,p=0.2", "--algo", "dpopt", "--out", str(tmp_path)]) == EXIT_OK
    (row,) = rows(tmp_path / "results.csv")
    assert row["total_utility"] == "NA" and row["optimal_utility"] == "NA"
    assert "warning" in capsys.readouterr().err.lower()


class TestExitCodes:
    def test_bad_gamma(self, tmp_path, motivating):
        assert main(["train", "--topology", str(motivating), "--gamma", "2", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_algo(self, tmp_path, motivating):
        assert main(["solve", "--topology", str(motivating), "--algo", "magic", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_missing_topology(self, tmp_path):
        assert main(["solve", "--topology", str(tmp_path / "nope.net"), "--out", str(tmp_path)]) == EXIT_DATA

    def test_malformed_topology(self, tmp_path):
        bad = tmp_path / "bad.net"
        bad.write_text("node a layer=1 d=1 u=1\nlink a a\n")
        assert main(["solve", "--topology", str(bad), "--out", str(tmp_path)]) == EXIT_DATA

    def test_compare_missing_file(self, tmp_path):
        assert main(["compare", "--results", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == EXIT_DATA

    def test_bad_generator(self, tmp_path):
        assert main(["solve", "--gen", "lattice:n=3", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_no_subcommand(self):
        assert main([]) == EXIT_USAGE


def test_config_file_sets_defaults(tmp_path, motivating):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nalgo = ratio\nno_timing = true\n")
    assert main(["solve", "--topology", str(motivating), "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    (row,) = rows(tmp_path / "results.csv")
    assert row["algo"] == "ratio" and row["elapsed_s"] == "NA"
    cfg.write_text("colour = blue\n")
    assert main(["solve", "--topology", str(motivating), "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE


class TestTrain:
    def test_zero_episodes(self, tmp_path, motivating):
        assert main(["train", "--topology", str(motivating), "--episodes", "0", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "curve_s0.csv").read_text() == "episode,return,epsilon,loss_mean\n"
        assert (tmp_path / "checkpoint_s0.npz").is_file()

    def test_row_count(self, tmp_path, motivating):
        assert main(["train", "--topology", str(motivating), "--episodes", "25", "--hidden", "16", "--out", str(tmp_path)]) == EXIT_OK
        assert len(rows(tmp_path / "curve_s0.csv")) == 25

    def test_checkpoint_needs_single_seed(self, tmp_path, motivating):
        args = ["train", "--topology", str(motivating), "--seed", "1", "--seed", "2", "--checkpoint", str(tmp_path / "c.npz")]
        assert main(args + ["--episodes", "1", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_ratio_guided_exploration_helps_early(self, tmp_path):
        def early_mean(omega):
            out = tmp_path / f"w{omega}"
            args = ["train", "--gen", "gnp:n=8,p=0.2", "--episodes", "200", "--hidden", "32", "--omega-ratio", str(omega)]
            args += [a for s in range(5) for a in ("--seed", str(s))]
            assert main(args + ["--out", str(out)]) == EXIT_OK
            return np.mean([int(r["return"]) for s in range(5) for r in rows(out / f"curve_s{s}.csv")])

        assert early_mean(0.5) >= early_mean(0.0)


class TestCompare:
    def test_summary(self, tmp_path):
        seeds = [a for s in range(10) for a in ("--seed", str(s))]
        for n in (5, 6, 7, 8):
            args = ["solve", "--gen", f"gnp:n={n}", "--algo", "ratio,random,dpopt", "--results", f"r{n}.csv"]
            assert main(args + seeds + ["--out", str(tmp_path)]) == EXIT_OK
        results = [str(tmp_path / f"r{n}.csv") for n in (5, 6, 7, 8)]
        assert main(["compare", "--results", *results, "--out", str(tmp_path)]) == EXIT_OK
        summary = rows(tmp_path / "summary.csv")
        assert list(summary[0].keys()) == SUMMARY_HEADER
        series = {}
        for r in summary:
            series.setdefault(r["algo"], []).append(float(r["mean_pct_of_opt"]))
        assert set(series) == {"dpopt", "random", "ratio"}
        assert all(len(v) == 4 for v in series.values())
        assert series["dpopt"] == [100.0] * 4
        assert np.mean(series["random"]) < np.mean(series["ratio"])
        assert (tmp_path / "plot_summary.py").read_text().startswith('"""Plot')

    def test_deeppr_rows(self, tmp_path):
        args = ["solve", "--gen", "gnp:n=5", "--algo", "deeppr,dpopt", "--episodes", "30", "--hidden", "16"]
        assert main(args + ["--out", str(tmp_path)]) == EXIT_OK
        by_algo = {r["algo"]: r for r in rows(tmp_path / "results.csv")}
        assert 0 < float(by_algo["deeppr"]["ratio_to_opt"]) <= 1

    def test_bucket_width(self, tmp_path):
        for n in (5, 6):
            assert main(["solve", "--gen", f"gnp:n={n}", "--algo", "ratio", "--results", f"r{n}.csv", "--out", str(tmp_path)]) == EXIT_OK
        paths = [str(tmp_path / "r5.csv"), str(tmp_path / "r6.csv")]
        assert main(["compare", "--results", *paths, "--bucket-width", "5", "--out", str(tmp_path)]) == EXIT_OK
        (row,) = rows(tmp_path / "summary.csv")
        assert row["bucket"] == "5-9" and row["count"] == "2"


class TestConvert:
    def test_one_layer(self, tmp_path, motivating):
        assert main(["convert", "--topology", str(motivating), "--op", "one-layer", "--out", str(tmp_path)]) == EXIT_OK
        s = load_topology(tmp_path / "motivating_one-layer.net")
        assert s.network.n == 9 and s.network.layer_nodes(0) == [8]

    def test_edge_to_node(self, tmp_path, motivating):
        args = ["convert", "--topology", str(motivating), "--op", "edge-to-node", "--edge", "v1", "v2", "--output", "e.net"]
        assert main(args + ["--out", str(tmp_path)]) == EXIT_OK
        s = load_topology(tmp_path / "e.net")
        assert s.network.n == 9 and 8 in s.failed

    def test_edge_to_node_needs_edge(self, tmp_path, motivating):
        assert main(["convert", "--topology", str(motivating), "--op", "edge-to-node", "--out", str(tmp_path)]) == EXIT_USAGE


def test_module_entry_point():
    import subprocess
    import sys

    done = subprocess.run([sys.executable, "-m", "progrecov", "--help"], capture_output=True, text=True, cwd=ROOT)
    assert done.returncode == 0 and "solve" in done.stdout
