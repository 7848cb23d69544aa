import csv
import json

import pytest

from fdcr import cli

FAST = ["--n-frames", "4000", "--replications", "2"]


def run(tmp_path, name, *args):
    out = tmp_path / name
    rc = cli.main([*args, "--out", str(out)])
    return rc, out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def header(path):
    return [line for line in open(path) if line.startswith("#")]


def test_simulate_ts_perfect_si(tmp_path):
    rc, out = run(tmp_path, "a", "simulate", "--scheme", "ts", "--pd-si", "1.0", *FAST)
    assert rc == 0
    assert all(float(r["collision"]) == 0.0 for r in rows(out / "results.csv"))


def test_injected_zero_matches_tr(tmp_path):
    rc1, a = run(tmp_path, "a", "simulate", "--scheme", "nn-ams", "--inject-prediction", "0,0", *FAST)
    rc2, b = run(tmp_path, "b", "simulate", "--scheme", "tr", *FAST)
    assert rc1 == rc2 == 0
    ra, rb = rows(a / "results.csv")[0], rows(b / "results.csv")[0]
    ra.pop("scheme"), rb.pop("scheme")
    assert ra == rb


def test_every_output_embeds_config_and_seed(tmp_path):
    rc, out = run(tmp_path, "a", "simulate", "--inject-prediction", "0.1,0.8", "--seed", "17", "--frames", *FAST)
    assert rc == 0
    h = header(out / "results.csv")
    assert "# seed = 17\n" in h and any("config_hash" in line for line in h)
    assert "# config seed = 17\n" in h
    doc = json.loads((out / "summary.json").read_text())
    assert doc["seed"] == 17 and doc["config"]["seed"] == 17 and "[simulation]" in doc["config_text"]
    assert (out / "config.ini").read_text() == doc["config_text"]
    assert (out / "frames.csv").exists()


def test_analytic(tmp_path):
    rc, out = run(tmp_path, "a", "analytic", "--inject-prediction", "0.1,0.8", "--m-range", "2:30")
    assert rc == 0
    table = rows(out / "analytic.csv")
    assert len(table) == 29
    for r in table:
        assert abs(float(r["pr_sum"]) - 1) < 1e-12
        assert float(r["tr_col"]) >= float(r["nn_col"]) >= float(r["ts_col"])
    summary = json.loads((out / "analytic.json").read_text())["summary"]
    assert 2 <= summary["argmax_nn_thr_nc"] <= 30 and 8 <= summary["argmax_tr_thr_nc"] <= 14


def test_analytic_refuses_non_exponential(tmp_path, capsys):
    rc, _ = run(tmp_path, "a", "analytic", "--inject-prediction", "0.1,0.8", "--set", "traffic.distribution=uniform")
    assert rc == 1
    assert "exponential" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["simulate", "--m", "1"], ["simulate", "--inject-prediction", "3,0"],
                                  ["simulate", "--config", "/nonexistent.ini"], ["simulate", "--set", "x.y=1"],
                                  ["eval"], ["bogus"], ["simulate", "--scheme", "xx"]])
def test_config_errors_exit_1(tmp_path, args):
    with pytest.raises(SystemExit) as exc:
        rc = cli.main([*args, "--out", str(tmp_path / "o")])
        raise SystemExit(rc)
    assert exc.value.code == 1


def test_runtime_failure_exit_2(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("simulated failure")
    monkeypatch.setattr(cli, "run_experiment", boom)
    rc, _ = run(tmp_path, "a", "simulate", *FAST)
    assert rc == 2


def test_train_eval_and_determinism(tmp_path):
    rc, a = run(tmp_path, "a", "train", "--m", "10")
    assert rc == 0
    rep = json.loads((a / "train_report.json").read_text())
    assert rep["test"]["n_tt"] == 30000 and 0 <= rep["test"]["p_e"] <= 1
    rc, b = run(tmp_path, "b", "train", "--m", "10")
    for f in ("net.txt", "loss.csv", "train_report.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rc, e = run(tmp_path, "e", "eval", "--m", "10", "--net", str(a / "net.txt"))
    assert rc == 0
    assert json.loads((e / "eval.json").read_text())["test"] == rep["test"]
    rc, _ = run(tmp_path, "f", "eval", "--m", "10", "--net", str(a / "net.txt"), "--set", "predictor.n=20")
    assert rc == 1


def test_train_error_grows_with_m(tmp_path):
    pe = {}
    for m in (5, 20):
        rc, out = run(tmp_path, f"m{m}", "train", "--m", str(m))
        assert rc == 0
        pe[m] = json.loads((out / "train_report.json").read_text())["test"]["p_e"]
    assert pe[5] < pe[20]


@pytest.mark.parametrize("args", [
    ["simulate", "--inject-prediction", "0.1,0.8", *FAST],
    ["sweep", "--m-range", "4,8", "--inject-prediction", "0.1,0.8", *FAST],
    ["compare", "--inject-prediction", "0.1,0.8", *FAST],
    ["analytic", "--inject-prediction", "0.1,0.8", "--m-range", "2:12"],
])
def test_byte_identical_reruns(tmp_path, args):
    rc1, a = run(tmp_path, "a", *args)
    rc2, b = run(tmp_path, "b", *args)
    assert rc1 == rc2 == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir()) and len(files) >= 2
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_compare_rows(tmp_path):
    rc, out = run(tmp_path, "a", "compare", "--inject-prediction", "0.1,0.8", *FAST)
    assert rc == 0
    q = [r["quantity"] for r in rows(out / "compare.csv")]
    assert q == ["sim_throughput", "sim_throughput_nc", "sim_collision",
                 "analytic_throughput", "analytic_throughput_nc", "analytic_collision"]


def test_sweep_scheme_subset(tmp_path):
    rc, out = run(tmp_path, "a", "sweep", "--m-range", "5", "--schemes", "ts", *FAST)
    assert rc == 0
    assert [r["scheme"] for r in rows(out / "sweep.csv")] == ["ts"]
    rc, _ = run(tmp_path, "b", "sweep", "--m-range", "5", "--schemes", "zz", *FAST)
    assert rc == 1
