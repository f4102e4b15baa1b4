"""
Classical plate localizer.

Strong gradients are thresholded, their local density is thresholded
again, and the closed, hole-filled connected components that look like
plates (aspect ratio, fill ratio, area) become detections.
"""

from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from app.core.config import settings
from app.core.error_handlers import InputTooSmallError
from app.core.logger import get_logger
from app.services.geometry import Box, Detection, DetectionClass, nms
from app.services.imaging import Image, to_gray

logger = get_logger(__name__)

MIN_FRAME_SIDE = 64


class LocalizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    edge_threshold: float = Field(settings.EDGE_THRESHOLD, gt=0.0)
    density_window: int = Field(settings.DENSITY_WINDOW, ge=1)
    density_threshold: float = Field(settings.DENSITY_THRESHOLD, gt=0.0, lt=1.0)
    min_aspect: float = Field(settings.MIN_PLATE_ASPECT, gt=0.0)
    max_aspect: float = Field(settings.MAX_PLATE_ASPECT, gt=0.0)
    min_fill: float = Field(settings.MIN_PLATE_FILL, ge=0.0, le=1.0)
    min_area: int = Field(settings.MIN_PLATE_AREA, ge=1)
    nms_iou: float = Field(settings.NMS_IOU_THRESHOLD, gt=0.0, lt=1.0)


def edge_map(frame: Image) -> Image:
    gray = to_gray(frame)
    return np.hypot(ndimage.sobel(gray, axis=1, mode="nearest"), ndimage.sobel(gray, axis=0, mode="nearest"))


def detect_plates(
    frame: Image,
    config: LocalizerConfig = LocalizerConfig(),
    view_id: int = 0,
    timestamp: float = 0.0,
) -> List[Detection]:
    """Plate detections for one frame, highest confidence first."""
    if min(frame.shape[:2]) < MIN_FRAME_SIDE:
        raise InputTooSmallError(
            f"Frame must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
            details={"shape": list(frame.shape)},
        )

    edges = edge_map(frame) > config.edge_threshold
    density = ndimage.uniform_filter(edges.astype(np.float64), size=config.density_window, mode="constant")
    mask = density > config.density_threshold
    mask = ndimage.binary_closing(mask, structure=np.ones((3, 3)), iterations=2)
    mask = ndimage.binary_fill_holes(mask)

    labels, count = ndimage.label(mask)
    detections: List[Detection] = []
    for index, region in enumerate(ndimage.find_objects(labels), start=1):
        if region is None:
            continue
        component = labels[region] == index
        region_edges = edges[region] & component
        if not region_edges.any():
            continue

        # Tighten to the edge pixels inside the component
        rows = np.flatnonzero(region_edges.any(axis=1))
        cols = np.flatnonzero(region_edges.any(axis=0))
        y0 = region[0].start + rows[0]
        y1 = region[0].start + rows[-1] + 1
        x0 = region[1].start + cols[0]
        x1 = region[1].start + cols[-1] + 1
        width, height = x1 - x0, y1 - y0

        aspect = width / height
        fill = component.sum() / component.size
        if width * height < config.min_area:
            continue
        if not config.min_aspect <= aspect <= config.max_aspect or fill < config.min_fill:
            continue

        confidence = float(np.clip(density[labels == index].mean(), 0.0, 1.0))
        detections.append(
            Detection(
                box=Box(float(x0), float(y0), float(x1), float(y1)),
                confidence=confidence,
                class_id=DetectionClass.PLATE,
                view_id=view_id,
                timestamp=timestamp,
            )
        )

    kept = nms(detections, config.nms_iou)
    logger.debug(f"view {view_id}: {count} components, {len(kept)} plate detections")
    return kept
