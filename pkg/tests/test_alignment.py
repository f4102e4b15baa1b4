import numpy as np
import pytest

from app.core.error_handlers import InputTooSmallError
from app.services.pipeline.alignment import align_plate, find_row_split, rectify_and_align
from app.services.synthgen import Layout


class FixedClassifier:
    def __init__(self, probs):
        self.probs = np.asarray(probs)

    def predict_proba(self, crops):
        return self.probs[: len(crops)]


def test_single_crop_is_resized(single_row_plate):
    aligned = align_plate(single_row_plate.image, Layout.SINGLE_ROW)
    assert aligned.image.shape == (32, 96)
    assert aligned.rows == [aligned.image]
    assert aligned.split_row is None


def test_crops_of_different_sizes_share_the_canonical_size(rng):
    plates = rectify_and_align([rng.random((40, 100)), rng.random((50, 120))])
    assert [p.image.shape for p in plates] == [(32, 96), (32, 96)]
    assert all(p.layout is Layout.SINGLE_ROW for p in plates)


def test_two_row_split_falls_between_rows(two_row_plate):
    split = find_row_split(two_row_plate.image)
    top, bottom = two_row_plate.char_boxes[:4], two_row_plate.char_boxes[4:]
    assert max(b.y_max for b in top) <= split <= min(b.y_min for b in bottom)

    aligned = align_plate(two_row_plate.image, Layout.TWO_ROW)
    assert aligned.split_row == split
    assert [r.shape for r in aligned.rows] == [(32, 96), (32, 96)]


def test_layout_comes_from_mean_classifier_probabilities(rng):
    crops = [rng.random((60, 80)), rng.random((60, 80))]
    classifier = FixedClassifier([[0.2, 0.8], [0.6, 0.4]])
    plates = rectify_and_align(crops, classifier=classifier)
    assert [p.layout for p in plates] == [Layout.TWO_ROW, Layout.TWO_ROW]
    assert all(len(p.rows) == 2 for p in plates)


def test_explicit_layout_wins_over_classifier(rng):
    classifier = FixedClassifier([[0.0, 1.0]])
    plates = rectify_and_align([rng.random((40, 100))], layout=Layout.SINGLE_ROW, classifier=classifier)
    assert plates[0].layout is Layout.SINGLE_ROW


def test_empty_and_too_short():
    assert rectify_and_align([]) == []
    with pytest.raises(InputTooSmallError):
        find_row_split(np.zeros((3, 20)))
