import json

import pytest

from ponziwarn.cli import main
from ponziwarn.synth import synth_generate, write_dataset


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_dataset(synth_generate(6, 18, delta=5, m=3, seed=3), root)
    return root


def data_args(data_dir):
    return ["--tx-dir", str(data_dir / "tx"), "--bytecode-dir", str(data_dir / "bytecode"),
            "--labels", str(data_dir / "labels.csv")]


def config_file(tmp_path, data_dir, **overrides):
    config = {
        "out_dir": str(tmp_path / "run"),
        "data_dir": str(data_dir),
        "delta": 5, "m": 3, "min_tx": 15,
        "train_size": 14, "val_size": 4, "test_size": 6,
        "methods": ["dual"], "repeats": 1,
        "hidden_dim": 16, "epochs": 2, "batch_size": 32,
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_synth_writes_dataset(tmp_path, capsys):
    out = tmp_path / "generated"
    code = main(["synth", "--n-ponzi", "3", "--n-normal", "5", "--delta", "5",
                 "--m", "2", "--seed", "1", "--out", str(out)])
    assert code == 0
    assert "wrote 8 accounts" in capsys.readouterr().out
    assert (out / "labels.csv").exists()
    assert len(list((out / "tx").iterdir())) == 8


def test_ingest_summary(data_dir, tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    code = main(["ingest", *data_args(data_dir), "--min-tx", "15",
                 "--out", str(manifest)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["accounts"] == 24
    assert summary["ponzi"] == 6 and summary["non_ponzi"] == 18
    assert summary["min_records"] >= 15
    listing = json.loads(manifest.read_text())
    assert len(listing["accounts"]) == 24


def test_teaug_stats_csv(data_dir, capsys):
    code = main(["teaug-stats", *data_args(data_dir), "--delta", "5", "--m", "3",
                 "--min-tx", "15"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "scale,tx_count,avg_nodes,avg_edges,n_ponzi,n_non_ponzi"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "1" and first[1] == "5"
    assert first[4] == "6" and first[5] == "18"


def test_train_evaluate_threshold_predict_chain(data_dir, tmp_path, capsys):
    config = config_file(tmp_path, data_dir)

    assert main(["train", "--config", str(config), "--method", "dual"]) == 0
    checkpoint = tmp_path / "run" / "checkpoint_dual.npz"
    assert checkpoint.exists()
    assert (tmp_path / "run" / "history_dual.json").exists()
    capsys.readouterr()

    assert main(["evaluate", "--config", str(config),
                 "--checkpoint", str(checkpoint)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "scale,tx_count,f1"
    assert len(lines) == 4

    # threshold needs a metrics.json; produce one via the full run
    assert main(["run", "--config", str(config)]) == 0
    capsys.readouterr()
    metrics = tmp_path / "run" / "metrics.json"
    assert main(["threshold", "--metrics", str(metrics), "--method", "dual",
                 "--epsilon", "0.05"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["tx_count"] == result["scale"] * 5

    # predict on one account straight from its files
    address = next((data_dir / "tx").iterdir()).stem
    assert main(["predict", "--checkpoint", str(checkpoint),
                 "--bytecode", str(data_dir / "bytecode" / f"{address}.hex"),
                 "--transactions", str(data_dir / "tx" / f"{address}.csv")]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["address"] == address
    assert verdict["label"] in (0, 1)
    assert 0.0 <= verdict["ponzi_probability"] <= 1.0
    assert verdict["verdict"] in ("ponzi", "non-ponzi")


def test_threshold_unknown_method_fails(data_dir, tmp_path, capsys):
    metrics = tmp_path / "metrics.json"
    metrics.write_text(json.dumps({"dual": {"delta": 5, "per_repeat": [[0.5, 0.5, 0.5]]}}))
    assert main(["threshold", "--metrics", str(metrics), "--method", "nope"]) == 1
    assert "nope" in capsys.readouterr().err


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["ingest", "--tx-dir", str(tmp_path / "no"), "--bytecode-dir",
                 str(tmp_path / "no"), "--labels", str(tmp_path / "no.csv")]) == 1
    assert "error:" in capsys.readouterr().err

    bad_config = tmp_path / "bad.json"
    bad_config.write_text(json.dumps({"out_dir": str(tmp_path), "bogus_key": 1}))
    assert main(["run", "--config", str(bad_config)]) == 1
    assert "bogus_key" in capsys.readouterr().err
