import csv
import json

import numpy as np
import pytest

from mfmzip.cli import main, read_config_file
from mfmzip.court import read_counts_csv

FAST = ["--iters", "120", "--burnin", "40"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipe")
    assert main(["pipeline", "--preset", "balanced-desk", "--out", str(out)] + FAST) == 0
    return out


def test_pipeline_outputs(pipeline_dir):
    part = read_csv(pipeline_dir / "summary" / "partition.csv")
    assert len(part) == 30
    est = read_csv(pipeline_dir / "summary" / "estimates.csv")
    assert list(est[0]) == ["cluster", "size", "rho"] + [f"beta{m}" for m in range(6)]
    assert sum(int(r["size"]) for r in est) == 30
    hpd = read_csv(pipeline_dir / "summary" / "hpd.csv")
    assert len(hpd) == 30 * 7
    assert all(float(r["hpd_lo"]) <= float(r["hpd_hi"]) for r in hpd)
    ev = {r["method"]: float(r["rand_index"]) for r in read_csv(pipeline_dir / "eval.csv")}
    assert set(ev) == {"mfm", "kmeans", "meanshift"}
    man = json.loads((pipeline_dir / "manifest_pipeline.json").read_text())
    assert {"seeds", "config_hash", "git_revision", "config"} <= set(man)
    assert "time" not in json.dumps(man).lower()


def test_pipeline_rerun_identical(pipeline_dir, tmp_path):
    assert main(["pipeline", "--preset", "balanced-desk", "--out", str(tmp_path)] + FAST) == 0
    for rel in ["fit/trace_chain0.ndjson", "summary/estimates.csv", "summary/hpd.csv", "eval.csv"]:
        assert (tmp_path / rel).read_bytes() == (pipeline_dir / rel).read_bytes()
    a = json.loads((tmp_path / "fit" / "manifest_fit.json").read_text())
    b = json.loads((pipeline_dir / "fit" / "manifest_fit.json").read_text())
    assert a["seeds"] == b["seeds"] and a["config_hash"] != ""
    assert sorted(a["inputs"].values()) == sorted(b["inputs"].values())


def test_missing_counts_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    rc = main(["fit", "--counts", str(missing), "--design", str(missing), "--out", str(tmp_path)])
    assert rc == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_flag_exit_2():
    assert main(["fit", "--bogus"]) == 2


def test_standalone_stages_and_config(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--type", "imbalanced", "--replicates", "2", "--out", str(sim), "--seed", "4"]) == 0
    truth = json.loads((sim / "truth.json").read_text())
    assert truth["group_sizes"] == [4, 14, 12]
    cfg = tmp_path / "fit.cfg"
    cfg.write_text("# fit settings\niters = 500\nburnin = 40\nchains = 2\nseed = 3\n")
    fit = tmp_path / "fit"
    args = ["fit", "--config", str(cfg), "--counts", str(sim / "rep001" / "counts.csv"),
            "--design", str(sim / "design.csv"), "--out", str(fit), "--iters", "100"]
    assert main(args) == 0
    meta = json.loads((fit / "fit_meta.json").read_text())
    assert meta["chains"] == 2
    assert [c["n_iter"] for c in meta["config"]] == [100, 100]  # flag beats file
    assert [c["n_burnin"] for c in meta["config"]] == [40, 40]
    assert meta["config"][0]["seed"] != meta["config"][1]["seed"]
    summ = tmp_path / "summ"
    traces = [str(fit / "trace_chain0.ndjson"), str(fit / "trace_chain1.ndjson")]
    assert main(["summarize", "--trace", *traces, "--meta", str(fit / "fit_meta.json"), "--out", str(summ)]) == 0
    info = json.loads((summ / "summary.json").read_text())
    assert info["draws"] == 120
    base = tmp_path / "base"
    assert main(["baselines", "--counts", str(sim / "rep001" / "counts.csv"), "--design", str(sim / "design.csv"),
                 "--k", "3", "--out", str(base)]) == 0
    ev = tmp_path / "ev.csv"
    rc = main(["eval", "--truth", str(sim / "rep001" / "truth.csv"), "--pred",
               f"mfm={summ / 'partition.csv'}", f"km={base / 'partition_kmeans.csv'}", "--out", str(ev)])
    assert rc == 0 and len(read_csv(ev)) == 2


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("iters 100\n")
    with pytest.raises(Exception):
        read_config_file(bad)
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    unknown = tmp_path / "u.cfg"
    unknown.write_text("warp = 9\n")
    assert main(["simulate", "--config", str(unknown), "--out", str(tmp_path)]) == 2


def write_shots(path, rng, players=6):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id", "x", "y"])
        for p in range(players):
            cx, cy = rng.uniform(5, 40), rng.uniform(5, 45)
            for _ in range(int(rng.integers(40, 90))):
                w.writerow([f"p{p}", min(max(rng.normal(cx, 3), 0), 47), min(max(rng.normal(cy, 3), 0), 50)])


def test_ingest_basis_plotdata(tmp_path):
    shots = tmp_path / "shots.csv"
    write_shots(shots, np.random.default_rng(0))
    ing = tmp_path / "ing"
    assert main(["ingest", "--shots", str(shots), "--out", str(ing), "--exclude", "p0"]) == 0
    counts = read_counts_csv(ing / "counts.csv")
    assert counts.J == 1175 and "p0" not in counts.player_ids and counts.n == 5
    hist = read_csv(ing / "histogram.csv")
    assert all(sum(int(r[k]) for k in ["0", "1", "2", "3", "4", "5", "6+"]) == 1175 for r in hist)

    bas = tmp_path / "bas"
    assert main(["basis", "--shots", str(shots), "--out", str(bas), "--rank", "3", "--restarts", "1",
                 "--max-iter", "50"]) == 0
    grid = read_csv(bas / "basis_grid.csv")
    assert len(grid) == 3 * 1175 and len({r["basis"] for r in grid}) == 3

    pd = tmp_path / "pd.csv"
    assert main(["plotdata", "--kind", "counts", "--input", str(ing / "counts.csv"), "--out", str(pd)]) == 0
    rows = read_csv(pd)
    assert list(rows[0]) == ["block", "block_x", "block_y", "value", "player_id"]
    assert len(rows) == 5 * 1175
    for i, pid in enumerate(counts.player_ids):
        assert sum(float(r["value"]) for r in rows if r["player_id"] == pid) == counts.y[i].sum()

    part = tmp_path / "part.csv"
    part.write_text("player_id,cluster\n" + "".join(f"{p},{1 + (i % 2)}\n" for i, p in enumerate(counts.player_ids)))
    assert main(["plotdata", "--kind", "partition", "--input", str(ing / "counts.csv"),
                 "--partition", str(part), "--out", str(pd)]) == 0
    assert {r["cluster"] for r in read_csv(pd)} == {"1", "2"}


def test_numeric_failure_exit_1(tmp_path, monkeypatch):
    from mfmzip import cli
    from mfmzip.sampler import SamplerError

    def boom(job):
        raise SamplerError("non-finite log-posterior at iteration 3", {"z": [0]})

    monkeypatch.setattr(cli, "_fit_one", boom)
    sim = tmp_path / "sim"
    assert main(["simulate", "--out", str(sim)]) == 0
    out = tmp_path / "fit"
    rc = main(["fit", "--counts", str(sim / "rep000" / "counts.csv"), "--design", str(sim / "design.csv"),
               "--out", str(out)])
    assert rc == 1
    assert json.loads((out / "sampler_state_dump.json").read_text()) == {"z": [0]}
