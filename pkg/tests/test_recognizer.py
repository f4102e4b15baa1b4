import pytest

from app.core.error_handlers import EmptyDatasetError, InputTooSmallError, UntrainedModelError
from app.schemas.training import OcrTrainConfig, SynthConfig
from app.services.neuralcore.ocr_net import init_ocr_params
from app.services.pipeline.alignment import align_plate
from app.services.pipeline.recognizer import OcrModel, recognize, row_samples, train_ocr
from app.services.synthgen import Layout, make_dataset

TINY = dict(conv_channels=(2, 2, 2, 2), lstm_hidden=4, batch_size=2, validation_fraction=0.0)


def test_untrained_model_refuses_to_read(tiny_ocr_model, single_row_plate):
    model = OcrModel(tiny_ocr_model.config, init_ocr_params(tiny_ocr_model.config, seed=0))
    with pytest.raises(UntrainedModelError):
        recognize(single_row_plate.image, model)


def test_recognition_is_deterministic(tiny_ocr_model, single_row_plate):
    first = recognize(single_row_plate.image, tiny_ocr_model)
    second = recognize(single_row_plate.image, tiny_ocr_model)
    assert first == second
    assert 0.0 <= first.confidence <= 1.0


def test_two_row_confidence_is_the_product_of_rows(tiny_ocr_model, two_row_plate):
    aligned = align_plate(two_row_plate.image, Layout.TWO_ROW)
    whole = recognize(aligned, tiny_ocr_model)
    rows = [recognize(row, tiny_ocr_model) for row in aligned.rows]
    assert whole.text == rows[0].text + rows[1].text
    assert whole.confidence == pytest.approx(rows[0].confidence * rows[1].confidence)


def test_crop_too_small(tiny_ocr_model, rng):
    with pytest.raises(InputTooSmallError):
        recognize(rng.random((6, 40)), tiny_ocr_model)


def test_row_samples_of_a_two_row_plate():
    dataset = make_dataset(SynthConfig(num_scenes=1, views_per_scene=1, two_row_fraction=1.0), seed=0)
    record = dataset.records[0]
    samples = row_samples(record)
    assert [text for _, text in samples] == record.spec.rows
    assert all(image.shape == (32, 96) for image, _ in samples)


def test_row_samples_of_a_single_row_plate():
    dataset = make_dataset(SynthConfig(num_scenes=1, views_per_scene=1, two_row_fraction=0.0), seed=0)
    record = dataset.records[0]
    assert [text for _, text in row_samples(record)] == [record.gt_text]


def test_infeasible_labels_are_skipped(single_row_plate):
    samples = [(single_row_plate.image, "29A12345"), (single_row_plate.image, "1" * 30)]
    result = train_ocr(samples, OcrTrainConfig(epochs=1, **TINY))
    assert result.skipped == 1
    assert len(result.loss_curve) == 1
    assert result.model.trained


def test_all_infeasible_is_an_empty_dataset(single_row_plate):
    with pytest.raises(EmptyDatasetError):
        train_ocr([(single_row_plate.image, "1" * 30)], OcrTrainConfig(epochs=1, **TINY))


def test_training_is_deterministic(single_row_plate, two_row_plate):
    samples = [(single_row_plate.image, "29A12345"), (two_row_plate.image, "29A1")]
    config = OcrTrainConfig(epochs=2, seed=3, **TINY)
    first, second = train_ocr(samples, config), train_ocr(samples, config)
    assert first.loss_curve == second.loss_curve
    for name, value in first.model.params.items():
        assert (value == second.model.params[name]).all()


@pytest.mark.slow
def test_overfits_a_small_set():
    dataset = make_dataset(SynthConfig(num_scenes=10, views_per_scene=1, two_row_fraction=0.0), seed=1)
    samples = [s for record in dataset.records for s in row_samples(record)]
    assert len(samples) == 10
    result = train_ocr(samples, OcrTrainConfig(epochs=200, validation_fraction=0.0, seed=0))
    assert len(result.loss_curve) == 200
    assert result.loss_curve[-1] < 0.01
