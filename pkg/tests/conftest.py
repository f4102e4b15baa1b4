import os
import tempfile

# Keep test runs from writing log files into the working tree
os.environ.setdefault("LPR_LOG_DIR", os.path.join(tempfile.gettempdir(), "lpr-test-logs"))

import numpy as np
import pytest

from app.services.glyphs import NUM_CLASSES
from app.services.neuralcore.ocr_net import OcrNetConfig, init_ocr_params
from app.services.pipeline.recognizer import OcrModel
from app.services.synthgen import DegradationProfile, Layout, PlateSpec, render_plate, render_scene
from tests.helpers import StubRecognizer


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_ocr_model():
    """Random-weight OCR model flagged as trained; outputs are arbitrary but deterministic."""
    config = OcrNetConfig(conv_channels=(2, 2, 2, 2), lstm_hidden=4, num_classes=NUM_CLASSES, input_height=32)
    return OcrModel(config, init_ocr_params(config, seed=0), trained=True)


@pytest.fixture
def single_row_plate():
    return render_plate(PlateSpec("29A12345"), seed=1)


@pytest.fixture
def two_row_plate():
    return render_plate(PlateSpec("29A12345", Layout.TWO_ROW, (80, 60)), seed=1)


@pytest.fixture
def clean_scene():
    """(frame, gt_box) of one undegraded plate."""
    return render_scene(PlateSpec("51F00123"), DegradationProfile(), seed=3)


@pytest.fixture
def stub_recognizer():
    return StubRecognizer()
