import json
import os

import numpy as np
import pytest

from d4x.cli import main, stream_rng, worker_cap
from d4x.gcn import GcnClassifier
from d4x.graphs import load_dataset
from d4x.ppgn import PpgnDenoiser


def run(tmp_path, *argv):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(argv))
    finally:
        os.chdir(cwd)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Shared directory with a small dataset and untrained model checkpoints."""
    d = tmp_path_factory.mktemp("cli")
    code = run(d, "gen-data", "--kind", "ba3motif", "--graphs", "12",
               "--seed", "0", "--out", "ds.jsonl")
    assert code == 0
    ds = load_dataset(str(d / "ds.jsonl"))
    GcnClassifier.init(ds.task, ds.feature_dim, ds.num_classes,
                       seed=0).save(str(d / "clf.ckpt"))
    PpgnDenoiser.init(ds.feature_dim, blocks=1, hidden=6,
                      seed=0).save(str(d / "den.ckpt"))
    return d


def test_gen_data_reruns_byte_identical(tmp_path):
    for name in ("a.jsonl", "b.jsonl"):
        assert run(tmp_path, "gen-data", "--kind", "ba3motif", "--graphs",
                   "10", "--seed", "7", "--out", name) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_gen_data_seed_changes_output(tmp_path):
    run(tmp_path, "gen-data", "--kind", "ba3motif", "--graphs", "10",
        "--seed", "1", "--out", "a.jsonl")
    run(tmp_path, "gen-data", "--kind", "ba3motif", "--graphs", "10",
        "--seed", "2", "--out", "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "b.jsonl").read_bytes()


def test_gen_data_tree_cycle(tmp_path):
    assert run(tmp_path, "gen-data", "--kind", "tree-cycle", "--depth", "4",
               "--motifs", "5", "--seed", "0", "--out", "tc.jsonl") == 0
    ds = load_dataset(str(tmp_path / "tc.jsonl"))
    assert ds.task == "node-classification"
    assert len(ds.graphs) == 1


def test_missing_dataset_exits_2(tmp_path):
    assert run(tmp_path, "train-classifier", "--dataset", "nope.jsonl") == 2


def test_missing_checkpoint_exits_2(workdir):
    assert run(workdir, "explain", "--dataset", "ds.jsonl",
               "--classifier", "clf.ckpt", "--denoiser", "missing.ckpt") == 2


def test_bad_config_path_exits_2(tmp_path):
    assert run(tmp_path, "--config", "absent.ini", "gen-data",
               "--kind", "ba3motif") == 2


def test_unknown_kind_exits_2(tmp_path):
    # argparse rejects the bad choice itself and exits with code 2
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "gen-data", "--kind", "bogus")
    assert exc.value.code == 2


def test_config_file_supplies_defaults(tmp_path):
    (tmp_path / "d4x.ini").write_text(
        "[gen-data]\nkind = ba3motif\ngraphs = 9\nseed = 3\nout = cfg.jsonl\n")
    assert run(tmp_path, "--config", "d4x.ini", "gen-data") == 0
    ds = load_dataset(str(tmp_path / "cfg.jsonl"))
    assert len(ds.graphs) == 9


def test_flags_override_config(tmp_path):
    (tmp_path / "d4x.ini").write_text("[gen-data]\nkind = ba3motif\ngraphs = 9\n")
    assert run(tmp_path, "--config", "d4x.ini", "gen-data", "--graphs", "6",
               "--out", "o.jsonl") == 0
    assert len(load_dataset(str(tmp_path / "o.jsonl")).graphs) == 6


def test_train_classifier_writes_log(workdir):
    assert run(workdir, "train-classifier", "--dataset", "ds.jsonl",
               "--epochs", "2", "--hidden", "8", "--out", "clf2.ckpt") == 0
    log = (workdir / "clf2.ckpt.log.csv").read_text().splitlines()
    assert log[0] == "epoch,loss,val_acc"
    assert len(log) == 3


def test_train_explainer_smoke(workdir):
    assert run(workdir, "train-explainer", "--dataset", "ds.jsonl",
               "--classifier", "clf.ckpt", "--epochs", "1", "--batch", "4",
               "--blocks", "1", "--hidden", "6", "--max-instances", "4",
               "--out", "den2.ckpt") == 0
    assert (workdir / "den2.ckpt").exists()
    assert (workdir / "den2.ckpt_trace.csv").exists()


def test_explain_outputs_jsonl(workdir):
    assert run(workdir, "explain", "--dataset", "ds.jsonl", "--classifier",
               "clf.ckpt", "--denoiser", "den.ckpt", "--mr", "0.1",
               "--out", "ex.jsonl") == 0
    rows = [json.loads(l) for l in (workdir / "ex.jsonl").read_text().splitlines()]
    ds = load_dataset(str(workdir / "ds.jsonl"))
    assert len(rows) == len(ds.test_idx)
    assert {"graph_id", "y_orig", "y_new", "added", "deleted"} <= rows[0].keys()


def test_explain_rerun_byte_identical(workdir):
    for name in ("r1.jsonl", "r2.jsonl"):
        assert run(workdir, "explain", "--dataset", "ds.jsonl", "--classifier",
                   "clf.ckpt", "--denoiser", "den.ckpt", "--seed", "5",
                   "--out", name) == 0
    assert (workdir / "r1.jsonl").read_bytes() == (workdir / "r2.jsonl").read_bytes()


def test_sample_outputs(workdir):
    assert run(workdir, "sample", "--classifier", "clf.ckpt", "--denoiser",
               "den.ckpt", "--n", "5", "--k", "2", "--t", "3", "--runs", "2",
               "--out", "smp") == 0
    for r in range(2):
        traj = (workdir / f"smp_run{r}_trajectory.csv").read_text().splitlines()
        assert traj[0] == "step,confidence,edge_count"
        g = json.loads((workdir / f"smp_run{r}_graph.json").read_text())
        assert g["n"] == 5 and 0 <= g["confidence"] <= 1


def test_evaluate_and_report(workdir):
    assert run(workdir, "evaluate", "--dataset", "ds.jsonl", "--classifier",
               "clf.ckpt", "--denoiser", "den.ckpt", "--mmd", "1",
               "--robustness", "1", "--sigmas", "0,0.05",
               "--max-instances", "4", "--out-prefix", "ev") == 0
    curve = (workdir / "ev_curve.csv").read_text().splitlines()
    assert curve[0] == "mr,cf_acc,fidelity,baseline_cf_acc"
    assert len(curve) == 11
    assert (workdir / "ev_mmd.csv").exists()
    assert (workdir / "ev_robustness.csv").exists()
    assert (workdir / "ev_report.txt").exists()
    assert run(workdir, "report", "--prefix", "ev") == 0
    for suffix in ("curve", "mmd", "robustness"):
        assert (workdir / f"ev_{suffix}.png").exists()


def test_evaluate_rerun_byte_identical(workdir):
    for prefix in ("dv1", "dv2"):
        assert run(workdir, "evaluate", "--dataset", "ds.jsonl",
                   "--classifier", "clf.ckpt", "--denoiser", "den.ckpt",
                   "--seed", "9", "--max-instances", "4",
                   "--out-prefix", prefix) == 0
    assert ((workdir / "dv1_curve.csv").read_bytes()
            == (workdir / "dv2_curve.csv").read_bytes())


def test_report_without_csvs_exits_2(tmp_path):
    assert run(tmp_path, "report", "--prefix", "nothing") == 2


def test_stream_rng_independent_streams():
    a = stream_rng(0, "data").random(5)
    b = stream_rng(0, "train").random(5)
    assert not np.allclose(a, b)
    assert np.array_equal(stream_rng(3, "eval", 7).random(4),
                          stream_rng(3, "eval", 7).random(4))


def test_worker_cap_env(monkeypatch):
    monkeypatch.delenv("D4_THREADS", raising=False)
    assert worker_cap() == 1
    monkeypatch.setenv("D4_THREADS", "4")
    assert worker_cap() == 4
    monkeypatch.setenv("D4_THREADS", "junk")
    assert worker_cap() == 1
    monkeypatch.setenv("D4_THREADS", "-2")
    assert worker_cap() == 1
