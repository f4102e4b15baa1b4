import json

import numpy as np
import pytest

from app.core.error_handlers import CheckpointError
from app.services.neuralcore.checkpoint import (
    Checkpoint,
    dumps_checkpoint,
    load_checkpoint,
    loads_checkpoint,
    save_checkpoint,
)
from app.services.neuralcore.ocr_net import init_ocr_params, toy_config
from app.services.pipeline.params import PipelineParams
from app.services.pipeline.recognizer import OcrModel


@pytest.fixture
def checkpoint():
    config = toy_config()
    return Checkpoint("ocr", config.model_dump(), init_ocr_params(config, seed=4), {"epochs": 3})


def test_identical_params_give_identical_bytes(checkpoint):
    again = Checkpoint(checkpoint.kind, dict(checkpoint.config), {k: v.copy() for k, v in checkpoint.params.items()}, {"epochs": 3})
    assert dumps_checkpoint(checkpoint) == dumps_checkpoint(again)


def test_round_trip_through_disk(tmp_path, checkpoint):
    path = save_checkpoint(tmp_path / "nested" / "ocr.ckpt", checkpoint)
    loaded = load_checkpoint(path, expected_kind="ocr")
    assert list(loaded.params) == list(checkpoint.params)
    for name, value in checkpoint.params.items():
        np.testing.assert_array_equal(loaded.params[name], value)
    assert loaded.metadata == {"epochs": 3}
    assert loaded.config["conv_channels"] == list(checkpoint.config["conv_channels"])


def test_truncated_body(checkpoint):
    data = dumps_checkpoint(checkpoint)
    with pytest.raises(CheckpointError):
        loads_checkpoint(data[:-8])
    with pytest.raises(CheckpointError):
        loads_checkpoint(data + b"\x00")


def test_wrong_kind_and_bad_header(checkpoint):
    with pytest.raises(CheckpointError):
        loads_checkpoint(dumps_checkpoint(checkpoint), expected_kind="layout")
    with pytest.raises(CheckpointError):
        loads_checkpoint(b"not json\n")
    with pytest.raises(CheckpointError):
        loads_checkpoint(b"no newline at all")


@pytest.mark.parametrize(
    "layers",
    [
        [{"shape": [2]}],
        [{"name": "w"}],
        [{"name": "w", "shape": "2x2"}],
        [{"name": "w", "shape": [-2]}],
        [7],
    ],
)
def test_malformed_layer_entries(layers):
    header = {"format_version": 1, "kind": "ocr", "config": {}, "layers": layers, "metadata": {}}
    data = json.dumps(header).encode("utf-8") + b"\n" + bytes(32)
    with pytest.raises(CheckpointError, match="Malformed"):
        loads_checkpoint(data)


def test_header_without_kind_or_object():
    with pytest.raises(CheckpointError, match="Malformed"):
        loads_checkpoint(b'{"format_version": 1, "layers": []}\n')
    with pytest.raises(CheckpointError, match="Malformed"):
        loads_checkpoint(b"[1, 2]\n")


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_pipeline_params_round_trip(tmp_path, tiny_ocr_model):
    PipelineParams(tiny_ocr_model).save(tmp_path)
    loaded = PipelineParams.load(tmp_path)
    assert loaded.layout is None and loaded.fuser is None
    assert loaded.ocr.trained
    assert loaded.ocr.config == tiny_ocr_model.config
    assert isinstance(loaded.ocr, OcrModel)


def test_pipeline_params_need_the_ocr_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        PipelineParams.load(tmp_path)
