"""End-to-end CLI tests: every subcommand exercised in-process through
main(argv), on a synthetic dataset generated by `heg synth`."""

import json
from pathlib import Path

import numpy as np
import pytest

from heg.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured


def run_json(capsys, *argv):
    code, captured = run_cli(capsys, *argv)
    assert code == 0, captured.err
    return json.loads(captured.out)


@pytest.fixture(scope="module")
def synth_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "synth.json"
    path.write_text(json.dumps({
        "name": "cli-synth",
        "class_sizes": [20, 20, 20],
        "mixing": {"intra": 0.03, "inter": 0.15},
        "features": {"dim": 8, "scale": 1.0},
        "sigma": 1.0,
        "splits": {"count": 4},
    }))
    return path


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, synth_config):
    out = tmp_path_factory.mktemp("data") / "cli-synth"
    code = main(["synth", "--config", str(synth_config), "--out", str(out),
                 "--seed", "3"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def search_out(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("runs") / "search"
    cfg = tmp_path_factory.mktemp("cfg2") / "run.json"
    cfg.write_text(json.dumps({
        "dataset": str(dataset_dir),
        "out": str(out),
        "seeds": [0],
        "search": {"n_layers": 2, "d1": 8, "shrink_rounds": 1,
                   "epochs_per_round": 3, "drop_per_round": 8,
                   "compact_epochs": 3, "dropout": 0.2},
    }))
    code = main(["search", "--config", str(cfg)])
    assert code == 0
    return out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_no_command_errors(capsys):
    with pytest.raises(SystemExit):
        main([])


def test_synth_writes_dataset_layout(dataset_dir):
    assert (dataset_dir / "meta.json").exists()
    assert (dataset_dir / "X.csv").exists()
    assert len(list((dataset_dir / "splits").glob("split_*.json"))) == 4


def test_stats_reports_counts(capsys, dataset_dir):
    doc = run_json(capsys, "stats", str(dataset_dir))
    assert doc["name"] == "cli-synth"
    assert doc["nodes"] == 60
    assert doc["classes"] == 3
    assert doc["features"] == 8
    assert doc["splits"] == 4
    assert 0.0 <= doc["node_homophily"] <= 0.5  # inter-dominant mixing
    assert doc["edges"] > 0


def test_stats_is_deterministic(capsys, dataset_dir):
    a = run_json(capsys, "stats", str(dataset_dir))
    b = run_json(capsys, "stats", str(dataset_dir))
    assert a == b


def test_ops_list(capsys):
    rows = run_json(capsys, "ops", "list", "--d1", "64")
    assert len(rows) == 23
    kinds = {row["kind"] for row in rows}
    assert {"GCN", "FAGCN", "l_skip", "l_lstm"} <= kinds


def test_search_writes_artifacts(search_out):
    seed_dir = search_out / "seed=0"
    assert (seed_dir / "checkpoint.json").exists()
    assert (seed_dir / "genotype.json").exists()
    assert (seed_dir / "selection_report.json").exists()
    assert (seed_dir / "shrink_log.json").exists()
    assert (search_out / "best_genotype.json").exists()
    report = json.loads((search_out / "search_report.json").read_text())
    assert report["best_seed"] == 0
    assert report["runs"][0]["best"] is True
    assert report["runs"][0]["val_accuracy"] >= 0.0
    counts = report["runs"][0]["active_counts"]
    assert counts["micro/1"] == 10  # 18 - 8 after one shrink round


def test_select_from_checkpoint(capsys, tmp_path, dataset_dir, search_out):
    out = tmp_path / "sel"
    doc = run_json(capsys, "select",
                   "--checkpoint", str(search_out / "seed=0" / "checkpoint.json"),
                   "--dataset", str(dataset_dir),
                   "--out", str(out),
                   "--criterion", "hete_argmin", "--seed", "1")
    assert (out / "genotype.json").exists()
    geno = json.loads((out / "genotype.json").read_text())
    assert len(geno["layers"]) == 2
    report = json.loads((out / "selection_report.json").read_text())
    assert report["criterion"] == "hete_argmin"


def test_select_ablation_produces_all_criteria(capsys, tmp_path, dataset_dir,
                                               search_out):
    out = tmp_path / "abl"
    doc = run_json(capsys, "select",
                   "--checkpoint", str(search_out / "seed=0" / "checkpoint.json"),
                   "--dataset", str(dataset_dir),
                   "--out", str(out), "--ablation")
    for crit in ("hete_argmin", "hete_argmax", "argmax_alpha", "val_loss"):
        assert (out / "ablation" / crit / "genotype.json").exists(), crit


def test_tune_writes_report_and_csv(capsys, tmp_path, dataset_dir, search_out):
    out = tmp_path / "tune"
    doc = run_json(capsys, "tune",
                   "--genotype", str(search_out / "best_genotype.json"),
                   "--dataset", str(dataset_dir),
                   "--out", str(out), "--iters", "2",
                   "--max-epochs", "15", "--patience", "8")
    report = json.loads((out / "tune_report.json").read_text())
    assert len(report["trials"]) == 2
    assert "best" in report
    csv_lines = (out / "trials.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 3  # header + 2 trials
    assert csv_lines[0].startswith("trial,")


def test_train_single_split(capsys, tmp_path, dataset_dir, search_out):
    out = tmp_path / "train"
    doc = run_json(capsys, "train",
                   "--genotype", str(search_out / "best_genotype.json"),
                   "--dataset", str(dataset_dir),
                   "--out", str(out), "--split-index", "1",
                   "--max-epochs", "15", "--patience", "8")
    report = json.loads((out / "train_report.json").read_text())
    assert report["result"]["epochs_run"] <= 15
    assert report["config"]["split_index"] == 1


def test_eval_over_splits(capsys, tmp_path, dataset_dir, search_out):
    out = tmp_path / "eval"
    doc = run_json(capsys, "eval",
                   "--genotype", str(search_out / "best_genotype.json"),
                   "--dataset", str(dataset_dir),
                   "--out", str(out), "--n-splits", "2",
                   "--max-epochs", "15", "--patience", "8")
    report = json.loads((out / "report.json").read_text())
    assert report["n_splits"] == 2
    per = (out / "per_split.csv").read_text().strip().splitlines()
    assert per[0] == "split,val_acc,test_acc,best_epoch,epochs_run,diverged"
    assert len(per) == 3


def test_eval_with_hyper_file(capsys, tmp_path, dataset_dir, search_out):
    hyper = tmp_path / "hyper.json"
    hyper.write_text(json.dumps({"best": {"hidden": 16, "lr": 0.005,
                                          "weight_decay": 1e-4,
                                          "optimizer": "adam", "dropout": 0.2,
                                          "activation": "elu"}}))
    out = tmp_path / "eval2"
    run_json(capsys, "eval",
             "--genotype", str(search_out / "best_genotype.json"),
             "--dataset", str(dataset_dir),
             "--out", str(out), "--n-splits", "1",
             "--hyper", str(hyper), "--max-epochs", "10", "--patience", "5")
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["hyperparams"]["hidden"] == 16


def test_missing_dataset_is_a_clean_error(capsys):
    code, captured = run_cli(capsys, "stats", "/nonexistent/nowhere")
    assert code == 1
    err = json.loads(captured.err)
    assert err["error"]["type"] == "FileNotFoundError"
    assert err["error"]["command"] == "stats"


def test_bad_criterion_rejected(capsys, dataset_dir, search_out, tmp_path):
    with pytest.raises(SystemExit):  # argparse choice violation
        main(["select",
              "--checkpoint", str(search_out / "seed=0" / "checkpoint.json"),
              "--dataset", str(dataset_dir),
              "--out", str(tmp_path / "x"), "--criterion", "bogus"])
