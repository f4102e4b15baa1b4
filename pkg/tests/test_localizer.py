import numpy as np
import pytest

from app.core.error_handlers import InputTooSmallError
from app.services.geometry import iou
from app.services.pipeline.localizer import detect_plates


def test_constant_frame_has_no_detections():
    assert detect_plates(np.full((160, 240), 0.5)) == []


def test_finds_a_clean_plate(clean_scene):
    frame, gt_box = clean_scene
    detections = detect_plates(frame, view_id=2, timestamp=1.5)
    assert detections
    assert iou(detections[0].box, gt_box) >= 0.7
    assert detections[0].view_id == 2 and detections[0].timestamp == 1.5
    confidences = [d.confidence for d in detections]
    assert confidences == sorted(confidences, reverse=True)


def test_two_plates_in_one_frame(single_row_plate):
    frame = np.full((240, 320), 0.45)
    plate = single_row_plate.image
    h, w = plate.shape
    frame[20:20 + h, 20:20 + w] = plate
    frame[170:170 + h, 150:150 + w] = plate
    detections = detect_plates(frame)
    assert len(detections) == 2
    tops = sorted(d.box.y_min for d in detections)
    assert tops[0] < 30 and tops[1] > 160


def test_frame_too_small():
    with pytest.raises(InputTooSmallError):
        detect_plates(np.zeros((50, 100)))
