import json

import pytest

from app.cli import main
from app.services.pipeline.params import FUSER_FILE, LAYOUT_FILE, OCR_FILE

TINY_SETTINGS = {"TRAIN_CONV_CHANNELS": [2, 2, 2, 2], "TRAIN_LSTM_HIDDEN": 4, "EPOCHS": 1, "BATCH_SIZE": 4}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_SETTINGS), encoding="utf-8")
    return str(path)


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--scenes", "2", "--views", "2", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_synth_is_reproducible(tmp_path, dataset_dir):
    again = tmp_path / "again"
    assert main(["synth", "--scenes", "2", "--views", "2", "--seed", "5", "--out", str(again)]) == 0
    assert (again / "manifest.jsonl").read_bytes() == (dataset_dir / "manifest.jsonl").read_bytes()
    assert len((dataset_dir / "manifest.jsonl").read_text(encoding="utf-8").splitlines()) == 4


def test_train_eval_run_and_simulate(tmp_path, dataset_dir, tiny_config):
    manifest = str(dataset_dir / "manifest.jsonl")
    params, params_again = tmp_path / "params", tmp_path / "params_again"

    for out in (params, params_again):
        assert main(["train-ocr", "--manifest", manifest, "--config", tiny_config, "--out", str(out)]) == 0
    assert (params / OCR_FILE).read_bytes() == (params_again / OCR_FILE).read_bytes()
    curves = json.loads((params / "ocr_training.json").read_text(encoding="utf-8"))
    assert len(curves["loss_curve"]) == 1 and curves["skipped"] == 0

    assert main(["train-classifier", "--manifest", manifest, "--epochs", "1", "--config", tiny_config, "--out", str(params)]) == 0
    assert main(["train-fuser", "--manifest", manifest, "--epochs", "1", "--out", str(params)]) == 0
    assert (params / LAYOUT_FILE).exists() and (params / FUSER_FILE).exists()
    fuser = json.loads((params / "fuser_training.json").read_text(encoding="utf-8"))
    assert fuser["trained_loss"] >= 0.0 and fuser["analytic_loss"] >= 0.0

    report_path = tmp_path / "eval.json"
    assert main(["eval", "--manifest", manifest, "--params", str(params), "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["num_scenes"] == 2 and report["tp"] + report["fn"] == 4

    compare_path = tmp_path / "compare.json"
    assert main(["eval", "--manifest", manifest, "--params", str(params), "--compare", "--out", str(compare_path)]) == 0
    assert set(json.loads(compare_path.read_text(encoding="utf-8"))) == {"fuse", "best_view", "first_view"}

    images = sorted(str(p) for p in (dataset_dir / "images").glob("scene00000_*.png"))
    run_path = tmp_path / "run.json"
    assert main(["run", *images, "--params", str(params), "--out", str(run_path)]) == 0
    assert isinstance(json.loads(run_path.read_text(encoding="utf-8")), list)

    sim_path = tmp_path / "sim.json"
    argv = ["simulate", "--manifest", manifest, "--params", str(params), "--cameras", "4", "--workers", "2",
            "--duration", "1", "--time-scale", "0", "--out", str(sim_path)]
    assert main(argv) == 0
    sim = json.loads(sim_path.read_text(encoding="utf-8"))
    assert sim["frames_offered"] == sim["frames_processed"] + sim["frames_dropped"]


def test_failures_exit_with_one(tmp_path):
    assert main(["eval", "--manifest", str(tmp_path / "missing.jsonl"), "--params", str(tmp_path)]) == 1
    assert main(["simulate", "--manifest", str(tmp_path / "missing.jsonl"), "--params", str(tmp_path)]) == 1
