import numpy as np
import pytest

from app.core.config import settings
from app.schemas.training import SynthConfig
from app.services.geometry import ViewBundle
from app.services.pipeline.evaluation import scene_frames
from app.services.pipeline.params import PipelineParams
from app.services.pipeline.runner import Frame, PlateRecognizer, PlateResult, run_pipeline
from app.services.synthgen import make_dataset


@pytest.fixture
def recognizer(tiny_ocr_model):
    return PlateRecognizer(PipelineParams(tiny_ocr_model))


@pytest.fixture
def scene():
    records = make_dataset(SynthConfig(num_scenes=1, views_per_scene=3, two_row_fraction=0.0), seed=2).records
    return scene_frames(records)[0]


def test_empty_bundle_gives_an_empty_result(recognizer):
    result = recognizer.run_bundle(ViewBundle((), 0.0, bundle_id=4), {})
    assert result == PlateResult.empty(4)
    assert result.fused_crop is None and result.confidence == 0.0


def test_blank_frames_give_one_empty_result(recognizer):
    frames = [Frame(v, 0.0, np.full((160, 240), 0.5)) for v in range(2)]
    results = recognizer.process_frames(frames, scene_id=3)
    assert len(results) == 1
    assert results[0].text == "" and results[0].scene_id == 3


def test_multi_view_scene(recognizer, scene):
    results = [r for r in recognizer.process_frames(scene, scene_id=0) if r.detections]
    assert results
    for result in results:
        assert result.scene_id == 0
        assert 0.0 <= result.confidence <= 1.0
        assert len(result.per_view_texts) == len(result.detections)
        assert len({d.view_id for d in result.detections}) == len(result.detections)
        assert result.fused_crop.shape == (32, 96)


def test_results_are_deterministic(recognizer, scene):
    first = recognizer.process_frames(scene)
    second = recognizer.process_frames(scene)
    assert [(r.text, r.confidence, r.per_view_texts) for r in first] == [(r.text, r.confidence, r.per_view_texts) for r in second]
    for a, b in zip(first, second):
        if a.fused_crop is not None:
            np.testing.assert_array_equal(a.fused_crop, b.fused_crop)


def test_run_pipeline_matches_the_recognizer(tiny_ocr_model, recognizer, scene):
    detections = [d for frame in scene for d in recognizer.detect(frame.image, frame.view_id, frame.timestamp)[:1]]
    bundle = ViewBundle(tuple(detections), detections[0].timestamp if detections else 0.0)
    images = {frame.view_id: frame.image for frame in scene}
    direct = run_pipeline(bundle, images, PipelineParams(tiny_ocr_model))
    assert direct.text == recognizer.run_bundle(bundle, images).text


def test_trained_mode_without_fuser_falls_back(tiny_ocr_model):
    config = settings.model_copy(update={"FUSION_MODE": "trained"})
    assert PlateRecognizer(PipelineParams(tiny_ocr_model), config).fuser is None


def test_single_frame_recognition(recognizer, clean_scene):
    frame, _ = clean_scene
    out = recognizer.recognize_frame(frame, view_id=1)
    assert out.detections and out.detections[0].view_id == 1
    assert out.processing_ms >= 0.0
