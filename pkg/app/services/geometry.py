"""
Box algebra and the overlap metric family.

Boxes are half-open axis-aligned rectangles in pixel coordinates. The
metrics follow the usual detection conventions: IoU, GIoU (enclosing-box
penalty), DIoU (center-distance penalty) and CIoU (DIoU plus aspect-ratio
consistency). `coverage` and `asym_quality` score a prediction against the
ground truth asymmetrically: missing plate area costs more than surplus
background, since a cropped-out character cannot be recovered downstream.
"""

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, List, Sequence, Tuple

from app.core.config import settings
from app.core.error_handlers import InvalidBoxError, InvalidParameterError


class DetectionClass(IntEnum):
    """Detector output classes: six vehicle types plus the plate."""
    CAR = 0
    TRUCK = 1
    BUS = 2
    VAN = 3
    MOTORBIKE = 4
    BICYCLE = 5
    PLATE = 6


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in coords):
            raise InvalidBoxError("Box coordinates must be finite", details={"box": list(coords)})
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidBoxError("Box must have strictly positive area", details={"box": list(coords)})

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "Box":
        if len(values) != 4:
            raise InvalidBoxError("Box needs exactly four coordinates", details={"box": list(values)})
        return cls(*(float(v) for v in values))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def intersection_area(self, other: "Box") -> float:
        w = min(self.x_max, other.x_max) - max(self.x_min, other.x_min)
        h = min(self.y_max, other.y_max) - max(self.y_min, other.y_min)
        if w <= 0.0 or h <= 0.0:
            return 0.0
        return w * h

    def enclosing(self, other: "Box") -> "Box":
        return Box(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def contains(self, other: "Box") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and self.x_max >= other.x_max
            and self.y_max >= other.y_max
        )


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float
    class_id: DetectionClass = DetectionClass.PLATE
    view_id: int = 0
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidParameterError(
                "Detection confidence must lie in [0, 1]",
                details={"confidence": self.confidence},
            )
        try:
            class_id = DetectionClass(self.class_id)
        except ValueError:
            raise InvalidParameterError(
                "Unknown detection class",
                details={"class_id": self.class_id, "known": [c.value for c in DetectionClass]},
            )
        object.__setattr__(self, "class_id", class_id)


@dataclass(frozen=True)
class ViewBundle:
    """Near-simultaneous plate detections of one physical plate across views."""
    detections: Tuple[Detection, ...]
    anchor_time: float
    bundle_id: int = 0

    @property
    def view_ids(self) -> List[int]:
        return [d.view_id for d in self.detections]


def _union_area(a: Box, b: Box, inter: float) -> float:
    return a.area + b.area - inter


def iou(a: Box, b: Box) -> float:
    inter = a.intersection_area(b)
    return inter / _union_area(a, b, inter)


def giou(a: Box, b: Box) -> float:
    inter = a.intersection_area(b)
    union = _union_area(a, b, inter)
    enclosing_area = a.enclosing(b).area
    return inter / union - (enclosing_area - union) / enclosing_area


def _center_penalty(a: Box, b: Box) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    c = a.enclosing(b)
    diag_sq = c.width ** 2 + c.height ** 2
    return ((ax - bx) ** 2 + (ay - by) ** 2) / diag_sq


def diou(a: Box, b: Box) -> float:
    return iou(a, b) - _center_penalty(a, b)


def ciou(a: Box, b: Box) -> float:
    """DIoU minus the aspect term alpha*v; `b` plays the ground-truth role."""
    overlap = iou(a, b)
    v = (4.0 / math.pi ** 2) * (math.atan(b.width / b.height) - math.atan(a.width / a.height)) ** 2
    alpha = 0.0 if v == 0.0 else v / ((1.0 - overlap) + v)
    return overlap - _center_penalty(a, b) - alpha * v


def coverage(pred: Box, gt: Box) -> float:
    return pred.intersection_area(gt) / gt.area


def asym_quality(pred: Box, gt: Box, beta: float = settings.ASYM_BETA) -> float:
    """
    |pred ∩ gt| / (|gt| + beta * |pred \\ gt|).

    Missing ground-truth area is charged at full weight, surplus predicted
    area at weight `beta`. With beta = 1 this is exactly IoU.
    """
    if not beta > 0.0:
        raise InvalidParameterError("beta must be positive", details={"beta": beta})
    inter = pred.intersection_area(gt)
    return inter / (gt.area + beta * (pred.area - inter))


def nms(dets: Sequence[Detection], iou_threshold: float) -> List[Detection]:
    """Greedy per-class suppression in descending confidence order."""
    if not 0.0 < iou_threshold < 1.0:
        raise InvalidParameterError("NMS threshold must lie in (0, 1)", details={"iou_threshold": iou_threshold})

    # Stable sort keeps input order among equal confidences
    ordered = sorted(dets, key=lambda d: -d.confidence)
    kept: List[Detection] = []
    for det in ordered:
        if all(
            k.class_id != det.class_id or iou(k.box, det.box) <= iou_threshold
            for k in kept
        ):
            kept.append(det)
    return kept


def associate_views(dets: Iterable[Detection], window: float) -> List[ViewBundle]:
    """
    Group plate detections from distinct views into bundles.

    The earliest unassigned detection anchors a bundle; later detections
    within `window` seconds of the anchor join it when their view is not yet
    represented. Ties in time are broken by view id. Non-plate detections
    are ignored.
    """
    if not window > 0.0:
        raise InvalidParameterError("Association window must be positive", details={"window": window})

    pending = sorted(
        (d for d in dets if d.class_id == DetectionClass.PLATE),
        key=lambda d: (d.timestamp, d.view_id),
    )
    assigned = [False] * len(pending)
    bundles: List[ViewBundle] = []

    for i, anchor in enumerate(pending):
        if assigned[i]:
            continue
        assigned[i] = True
        members = [anchor]
        seen_views = {anchor.view_id}
        for j in range(i + 1, len(pending)):
            cand = pending[j]
            if cand.timestamp - anchor.timestamp > window:
                break
            if assigned[j] or cand.view_id in seen_views:
                continue
            assigned[j] = True
            members.append(cand)
            seen_views.add(cand.view_id)
        bundles.append(ViewBundle(tuple(members), anchor.timestamp, bundle_id=len(bundles)))

    return bundles
