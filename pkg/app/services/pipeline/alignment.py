from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.error_handlers import InputTooSmallError
from app.services.imaging import Image, resize_bilinear, to_gray
from app.services.pipeline.layout import LAYOUT_ORDER, LayoutClassifier
from app.services.synthgen import Layout

CANONICAL_SIZE = (settings.CANONICAL_PLATE_WIDTH, settings.CANONICAL_PLATE_HEIGHT)

# Row break is searched in this band of the plate height
_SPLIT_BAND = (0.3, 0.7)


@dataclass
class AlignedPlate:
    """A crop resized to the canonical size plus its row images."""
    image: Image
    layout: Layout
    rows: List[Image] = field(default_factory=list)
    split_row: Optional[int] = None


def find_row_split(crop: Image) -> int:
    """Row index with the least ink inside the middle band; the first one wins ties."""
    gray = to_gray(crop)
    h = gray.shape[0]
    if h < 4:
        raise InputTooSmallError("Crop too short to split into rows", details={"height": h})
    ink = (gray.max() - gray).mean(axis=1)
    lo = max(1, int(np.floor(h * _SPLIT_BAND[0])))
    hi = min(h - 1, int(np.ceil(h * _SPLIT_BAND[1])))
    return lo + int(np.argmin(ink[lo:hi]))


def align_plate(crop: Image, layout: Layout, canonical_size: Tuple[int, int] = CANONICAL_SIZE) -> AlignedPlate:
    gray = to_gray(crop)
    image = resize_bilinear(gray, canonical_size)
    if Layout(layout) is Layout.TWO_ROW:
        split = find_row_split(gray)
        rows = [resize_bilinear(gray[:split], canonical_size), resize_bilinear(gray[split:], canonical_size)]
        return AlignedPlate(image, Layout.TWO_ROW, rows, split)
    return AlignedPlate(image, Layout.SINGLE_ROW, [image])


def rectify_and_align(
    crops: Sequence[Image],
    layout: Optional[Layout] = None,
    classifier: Optional[LayoutClassifier] = None,
    canonical_size: Tuple[int, int] = CANONICAL_SIZE,
) -> List[AlignedPlate]:
    """
    Bring every crop to the canonical plate size.

    The layout applies to the whole group. When it is not given it is the
    argmax of the classifier's mean probabilities over the crops; without a
    classifier, plates are treated as single-row.
    """
    if not crops:
        return []
    if layout is None:
        layout = Layout.SINGLE_ROW
        if classifier is not None:
            probs = classifier.predict_proba(crops).mean(axis=0)
            layout = LAYOUT_ORDER[int(probs.argmax())]
    return [align_plate(c, layout, canonical_size) for c in crops]
