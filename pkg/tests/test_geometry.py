import math

import numpy as np
import pytest

from app.core.config import settings
from app.core.error_handlers import InvalidBoxError, InvalidParameterError
from app.services.geometry import (
    Box,
    Detection,
    DetectionClass,
    asym_quality,
    associate_views,
    ciou,
    coverage,
    diou,
    giou,
    iou,
    nms,
)

A = Box(0, 0, 2, 2)
B = Box(1, 1, 3, 3)


def det(box, confidence, view_id=0, timestamp=0.0, class_id=DetectionClass.PLATE):
    return Detection(Box(*box), confidence, class_id, view_id, timestamp)


def random_overlapping_pair(rng):
    x0, y0 = rng.uniform(0, 10, 2)
    w, h = rng.uniform(1, 5, 2)
    a = Box(x0, y0, x0 + w, y0 + h)
    dx, dy = rng.uniform(-0.8, 0.8, 2) * (w, h)
    sw, sh = rng.uniform(0.5, 2.0, 2)
    b = Box(x0 + dx, y0 + dy, x0 + dx + w * sw, y0 + dy + h * sh)
    return a, b


class TestBox:
    def test_rejects_empty_and_non_finite(self):
        with pytest.raises(InvalidBoxError):
            Box(1, 0, 1, 2)
        with pytest.raises(InvalidBoxError):
            Box(0, 0, math.nan, 2)
        with pytest.raises(InvalidBoxError):
            Box.from_list([0, 0, 1])

    def test_detection_confidence_range(self):
        with pytest.raises(InvalidParameterError):
            Detection(A, 1.5)

    def test_unknown_detection_class(self):
        with pytest.raises(InvalidParameterError) as excinfo:
            Detection(A, 0.5, class_id=42)
        assert excinfo.value.status_code == 422
        assert excinfo.value.details["class_id"] == 42
        assert Detection(A, 0.5, class_id=6).class_id is DetectionClass.PLATE


class TestOverlapMetrics:
    def test_iou_examples(self):
        assert iou(A, Box(0, 0, 2, 2)) == 1.0
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 6, 6)) == 0.0
        assert iou(A, B) == pytest.approx(1 / 7)

    def test_giou_examples(self):
        assert giou(A, A) == pytest.approx(1.0)
        assert giou(A, B) == pytest.approx(1 / 7 - 2 / 9)
        assert giou(Box(0, 0, 1, 1), Box(9, 9, 10, 10)) == pytest.approx(-0.98)

    def test_diou_examples(self):
        assert diou(Box(0, 0, 4, 4), Box(1, 1, 3, 3)) == pytest.approx(0.25)
        assert diou(A, B) == pytest.approx(1 / 7 - 2 / 18)
        assert diou(A, A) == pytest.approx(1.0)

    def test_ciou_matches_diou_for_equal_aspect(self):
        assert ciou(A, A) == pytest.approx(1.0)
        assert ciou(Box(0, 0, 4, 4), Box(1, 1, 3, 3)) == pytest.approx(0.25)
        assert ciou(A, B) == pytest.approx(diou(A, B))

    def test_ciou_penalizes_aspect_mismatch(self):
        wide, tall = Box(0, 0, 4, 1), Box(1.5, -1.5, 2.5, 2.5)
        assert ciou(wide, tall) < diou(wide, tall)

    def test_coverage_examples(self):
        gt = Box(0, 0, 4, 2)
        assert coverage(Box(-1, -1, 5, 3), gt) == 1.0
        assert coverage(gt, gt) == 1.0
        assert coverage(Box(0, 0, 2, 2), gt) == pytest.approx(0.5)

    def test_asym_quality_examples(self):
        gt = Box(0, 0, 2, 2)
        assert asym_quality(gt, gt, beta=0.3) == pytest.approx(1.0)
        assert asym_quality(A, B, beta=1.0) == pytest.approx(1 / 7)
        assert asym_quality(Box(0, 0, 4, 2), gt, beta=0.5) == pytest.approx(2 / 3)
        with pytest.raises(InvalidParameterError):
            asym_quality(A, B, beta=0.0)

    def test_asym_quality_default_beta_comes_from_settings(self):
        gt = Box(0, 0, 2, 2)
        wide = Box(0, 0, 4, 2)
        assert asym_quality(wide, gt) == pytest.approx(1.0 / (1.0 + settings.ASYM_BETA))
        assert asym_quality(wide, gt) == asym_quality(wide, gt, beta=settings.ASYM_BETA)

    def test_identities_on_random_pairs(self, rng):
        for _ in range(500):
            a, b = random_overlapping_pair(rng)
            assert giou(a, b) <= iou(a, b) + 1e-15
            assert abs(asym_quality(a, b, beta=1.0) - iou(a, b)) <= 1e-12
            assert 0.0 <= iou(a, b) <= 1.0
            assert iou(a, b) == pytest.approx(iou(b, a))

    def test_monte_carlo_rasterization(self, rng):
        n = 1_000_000
        for _ in range(30):
            a, b = random_overlapping_pair(rng)
            enc = a.enclosing(b)
            xs = rng.uniform(enc.x_min, enc.x_max, n)
            ys = rng.uniform(enc.y_min, enc.y_max, n)
            in_a = (xs >= a.x_min) & (xs < a.x_max) & (ys >= a.y_min) & (ys < a.y_max)
            in_b = (xs >= b.x_min) & (xs < b.x_max) & (ys >= b.y_min) & (ys < b.y_max)
            inter, union = np.count_nonzero(in_a & in_b), np.count_nonzero(in_a | in_b)
            mc_iou = inter / union
            mc_giou = mc_iou - (n - union) / n
            assert abs(mc_iou - iou(a, b)) < 5e-3
            assert abs(mc_giou - giou(a, b)) < 5e-3


class TestNms:
    def test_empty_and_single(self):
        assert nms([], 0.5) == []
        only = det((0, 0, 2, 2), 0.9)
        assert nms([only], 0.5) == [only]

    def test_identical_boxes_keep_the_most_confident(self):
        kept = nms([det((0, 0, 2, 2), 0.8), det((0, 0, 2, 2), 0.9)], 0.5)
        assert [d.confidence for d in kept] == [0.9]

    def test_low_overlap_survives(self):
        dets = [det((0, 0, 2, 2), 0.9), det((1, 1, 3, 3), 0.8), det((5, 5, 7, 7), 0.7)]
        assert [d.confidence for d in nms(dets, 0.2)] == [0.9, 0.8, 0.7]

    def test_suppression_is_per_class(self):
        dets = [det((0, 0, 2, 2), 0.9), det((0, 0, 2, 2), 0.8, class_id=DetectionClass.CAR)]
        assert len(nms(dets, 0.5)) == 2

    def test_invalid_threshold(self):
        with pytest.raises(InvalidParameterError):
            nms([], 1.0)


class TestAssociateViews:
    def test_near_simultaneous_views_form_one_bundle(self):
        dets = [det((0, 0, 2, 2), 0.9, view_id=v, timestamp=t) for v, t in ((1, 0.0), (2, 0.01), (3, 0.02))]
        bundles = associate_views(dets, 0.1)
        assert len(bundles) == 1
        assert bundles[0].view_ids == [1, 2, 3]

    def test_distant_detections_split(self):
        dets = [det((0, 0, 2, 2), 0.9, view_id=0, timestamp=0.0), det((0, 0, 2, 2), 0.9, view_id=1, timestamp=5.0)]
        assert len(associate_views(dets, 0.1)) == 2

    def test_earliest_anchor_rule(self):
        dets = [det((0, 0, 2, 2), 0.9, view_id=v, timestamp=t) for v, t in ((0, 0.0), (1, 0.09), (2, 0.18))]
        bundles = associate_views(dets, 0.1)
        assert [[d.timestamp for d in b.detections] for b in bundles] == [[0.0, 0.09], [0.18]]
        assert [b.bundle_id for b in bundles] == [0, 1]

    def test_one_detection_per_view_and_non_plates_ignored(self):
        dets = [
            det((0, 0, 2, 2), 0.9, view_id=0, timestamp=0.0),
            det((3, 3, 5, 5), 0.8, view_id=0, timestamp=0.01),
            det((0, 0, 2, 2), 0.9, view_id=1, timestamp=0.0, class_id=DetectionClass.BUS),
        ]
        bundles = associate_views(dets, 0.1)
        assert len(bundles) == 2
        assert all(len(set(b.view_ids)) == len(b.view_ids) for b in bundles)
        assert sum(len(b.detections) for b in bundles) == 2
