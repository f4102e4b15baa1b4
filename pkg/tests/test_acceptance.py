"""End-to-end checks against an OCR model trained at the default training scale."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.schemas.training import OcrTrainConfig, SynthConfig
from app.services.glyphs import encode_text
from app.services.imaging import encode_png
from app.services.pipeline.evaluation import align_characters
from app.services.pipeline.multiview import fuse_views
from app.services.pipeline.params import PipelineParams
from app.services.pipeline.recognizer import recognize, row_samples, train_ocr
from app.services.pipeline.runner import Frame, PlateRecognizer
from app.services.synthgen import (
    DegradationProfile,
    PlateSpec,
    SceneRecord,
    make_dataset,
    random_plate_text,
    render_scene,
)
from main import create_app

pytestmark = pytest.mark.slow

TRAIN_SCENES = 2500
TRAIN_VIEWS = 2
HELD_OUT_PLATES = 500
MULTI_VIEW_BUNDLES = 200


def scene_record(text: str, seed: int, profile: DegradationProfile = DegradationProfile()) -> SceneRecord:
    spec = PlateSpec(text)
    frame, gt_box = render_scene(spec, profile, seed)
    return SceneRecord(frame, gt_box, text, 0, 0.0, profile, seed, spec=spec)


def aligned_crop(record: SceneRecord) -> np.ndarray:
    [(image, _)] = row_samples(record)
    return image


def character_hits(truth: str, predicted: str) -> int:
    pairs = align_characters(encode_text(truth), encode_text(predicted))
    return sum(1 for t, p in pairs if t != 0 and t == p)


def degraded_profile(rng: np.random.Generator) -> DegradationProfile:
    return DegradationProfile(
        blur_sigma=float(rng.uniform(1.5, 2.5)),
        noise_std=float(rng.uniform(0.05, 0.1)),
        occlusion_fraction=float(rng.uniform(0.25, 0.4)),
        perspective_skew=float(rng.uniform(0.0, 0.15)),
        brightness_scale=float(rng.uniform(0.6, 0.9)),
    )


@pytest.fixture(scope="module")
def trained():
    """About five thousand rendered plates, trained with the TRAIN_* settings."""
    config = SynthConfig(num_scenes=TRAIN_SCENES, views_per_scene=TRAIN_VIEWS)
    records = make_dataset(config, seed=11).records
    samples = [sample for record in records for sample in row_samples(record)]
    return train_ocr(samples, OcrTrainConfig())


@pytest.fixture(scope="module")
def model(trained):
    return trained.model


def test_loss_curve_converges_without_overfitting(trained):
    assert len(trained.loss_curve) >= 20
    assert trained.loss_curve[19] < 0.5 * trained.loss_curve[0]
    assert trained.val_curve
    assert trained.val_curve[-1] <= 2.0 * trained.loss_curve[-1]


def test_clean_held_out_plates(model):
    rng = np.random.default_rng(2024)
    exact, hits, total = 0, 0, 0
    for i in range(HELD_OUT_PLATES):
        text = random_plate_text(rng)
        predicted = recognize(aligned_crop(scene_record(text, seed=100_000 + i)), model).text
        exact += int(predicted == text)
        hits += character_hits(text, predicted)
        total += len(text)
    assert exact / HELD_OUT_PLATES >= 0.90
    assert hits / total >= 0.97


def test_reads_a_clean_plate_and_nothing_on_a_blank_one(model):
    assert recognize(aligned_crop(scene_record("29A12345", seed=7)), model).text == "29A12345"
    assert recognize(np.full((36, 150), 0.9), model).text == ""


def test_fused_views_beat_the_degraded_view(model):
    rng = np.random.default_rng(77)
    hits = {"fused": 0, "best": 0, "worst": 0}
    total = 0
    for i in range(MULTI_VIEW_BUNDLES):
        text = random_plate_text(rng)
        mild = DegradationProfile(
            blur_sigma=float(rng.uniform(0.0, 0.3)),
            noise_std=float(rng.uniform(0.0, 0.01)),
            perspective_skew=float(rng.uniform(0.0, 0.04)),
        )
        views = [
            aligned_crop(scene_record(text, seed=200_000 + 2 * i, profile=mild)),
            aligned_crop(scene_record(text, seed=200_001 + 2 * i, profile=degraded_profile(rng))),
        ]
        single = [character_hits(text, recognize(v, model).text) for v in views]
        hits["fused"] += character_hits(text, recognize(fuse_views(views), model).text)
        hits["best"] += max(single)
        hits["worst"] += min(single)
        total += len(text)

    accuracy = {name: count / total for name, count in hits.items()}
    assert accuracy["fused"] >= accuracy["best"] - 0.01
    assert accuracy["fused"] >= accuracy["worst"] + 0.05


def test_three_clean_views_of_one_plate(model):
    recognizer = PlateRecognizer(PipelineParams(model))
    frames = []
    for view_id in range(3):
        frame, _ = render_scene(PlateSpec("51F00123"), DegradationProfile(), seed=30 + view_id)
        frames.append(Frame(view_id, 0.01 * view_id, frame))
    [result] = recognizer.process_frames(frames)
    assert len(result.detections) == 3
    assert result.text == "51F00123"


def test_fusion_recovers_an_occluded_view(model):
    recognizer = PlateRecognizer(PipelineParams(model))
    clean, _ = render_scene(PlateSpec("51F00123"), DegradationProfile(), seed=40)
    occluded, _ = render_scene(PlateSpec("51F00123"), DegradationProfile(occlusion_fraction=0.5), seed=41)
    [result] = recognizer.process_frames([Frame(0, 0.0, clean), Frame(1, 0.01, occluded)])
    assert len(result.detections) == 2
    assert result.text == "51F00123"
    occluded_view = [d.view_id for d in result.detections].index(1)
    assert result.per_view_texts[occluded_view] != "51F00123"


def test_service_reads_a_clean_frame(model):
    frame, _ = render_scene(PlateSpec("29A12345"), DegradationProfile(), seed=50)
    with TestClient(create_app(PlateRecognizer(PipelineParams(model)), num_workers=2)) as client:
        response = client.post(
            "/recognize",
            files={"file": ("frame.png", encode_png(frame), "image/png")},
            data={"camera_id": "5"},
        )
    assert response.status_code == 200
    assert response.json()["text"] == "29A12345"
