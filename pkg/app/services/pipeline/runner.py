"""
End-to-end recognition: localize per view, align, combine views, read.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from app.core.config import Settings, settings as default_settings
from app.core.logger import get_logger
from app.services.geometry import Detection, ViewBundle, associate_views
from app.services.imaging import Image, crop
from app.services.pipeline.alignment import AlignedPlate, rectify_and_align
from app.services.pipeline.localizer import LocalizerConfig, detect_plates
from app.services.pipeline.multiview import ViewStrategy, fuse_views
from app.services.pipeline.params import PipelineParams
from app.services.pipeline.recognizer import Recognition, recognize
from app.services.synthgen import Layout

logger = get_logger(__name__)


@dataclass
class PlateResult:
    bundle_id: int
    fused_crop: Optional[Image]
    text: str
    per_view_texts: List[str]
    confidence: float
    detections: List[Detection] = field(default_factory=list)
    layout: Optional[Layout] = None
    scene_id: Optional[int] = None

    @classmethod
    def empty(cls, bundle_id: int, scene_id: Optional[int] = None) -> "PlateResult":
        return cls(bundle_id, None, "", [], 0.0, scene_id=scene_id)


class Frame(NamedTuple):
    view_id: int
    timestamp: float
    image: Image


class FrameRecognition(NamedTuple):
    detections: List[Detection]
    text: str
    confidence: float
    processing_ms: float


def _fuse_rows(plates: Sequence[AlignedPlate], c: float, strategy: ViewStrategy, fuser) -> AlignedPlate:
    rows = [fuse_views([p.rows[r] for p in plates], c, strategy, fuser) for r in range(len(plates[0].rows))]
    return AlignedPlate(np.vstack(rows), plates[0].layout, rows)


class PlateRecognizer:
    """Pure given its parameters; safe to share between worker threads."""

    def __init__(
        self,
        params: PipelineParams,
        config: Settings = default_settings,
        strategy: Optional[ViewStrategy] = None,
    ):
        self.params = params
        self.config = config
        self.localizer = LocalizerConfig(
            edge_threshold=config.EDGE_THRESHOLD,
            density_window=config.DENSITY_WINDOW,
            density_threshold=config.DENSITY_THRESHOLD,
            min_aspect=config.MIN_PLATE_ASPECT,
            max_aspect=config.MAX_PLATE_ASPECT,
            min_fill=config.MIN_PLATE_FILL,
            min_area=config.MIN_PLATE_AREA,
            nms_iou=config.NMS_IOU_THRESHOLD,
        )
        self.strategy = ViewStrategy(strategy or config.FUSION_STRATEGY)
        self.fuser = params.fuser if config.FUSION_MODE == "trained" else None
        if config.FUSION_MODE == "trained" and params.fuser is None:
            logger.warning("FUSION_MODE=trained but no fuser checkpoint is loaded; using analytic fusion")

    def detect(self, frame: Image, view_id: int = 0, timestamp: float = 0.0) -> List[Detection]:
        return detect_plates(frame, self.localizer, view_id=view_id, timestamp=timestamp)

    def read(self, plate: AlignedPlate) -> Recognition:
        return recognize(plate, self.params.ocr, self.config.BEAM_WIDTH)

    def recognize_frame(self, frame: Image, view_id: int = 0) -> FrameRecognition:
        """Single-view path: the most confident detection is read."""
        started = time.perf_counter()
        detections = self.detect(frame, view_id=view_id)
        text, confidence = "", 0.0
        if detections:
            best = detections[0]
            aligned = rectify_and_align([crop(frame, *best.box.as_list())], classifier=self.params.layout)[0]
            text, confidence = self.read(aligned)
        return FrameRecognition(detections, text, confidence, (time.perf_counter() - started) * 1000.0)

    def run_bundle(
        self,
        bundle: ViewBundle,
        frames: Mapping[int, Image],
        scene_id: Optional[int] = None,
        strategy: Optional[ViewStrategy] = None,
    ) -> PlateResult:
        if not bundle.detections:
            return PlateResult.empty(bundle.bundle_id, scene_id)

        crops = [crop(frames[d.view_id], *d.box.as_list()) for d in bundle.detections]
        aligned = rectify_and_align(crops, classifier=self.params.layout)
        per_view = [self.read(a).text for a in aligned]

        combined = _fuse_rows(aligned, self.config.FUSION_TEMPERATURE, strategy or self.strategy, self.fuser)
        text, confidence = self.read(combined)
        return PlateResult(
            bundle_id=bundle.bundle_id,
            fused_crop=combined.image,
            text=text,
            per_view_texts=per_view,
            confidence=confidence,
            detections=list(bundle.detections),
            layout=combined.layout,
            scene_id=scene_id,
        )

    def process_frames(
        self,
        frames: Sequence[Frame],
        scene_id: Optional[int] = None,
        strategy: Optional[ViewStrategy] = None,
    ) -> List[PlateResult]:
        """Detect in every frame, bundle detections across views, read each bundle."""
        images: Dict[int, Image] = {}
        detections: List[Detection] = []
        for frame in frames:
            images[frame.view_id] = frame.image
            detections.extend(self.detect(frame.image, frame.view_id, frame.timestamp))
        bundles = associate_views(detections, self.config.ASSOCIATION_WINDOW_SECONDS)
        if not bundles:
            return [PlateResult.empty(0, scene_id)]
        return [self.run_bundle(b, images, scene_id, strategy) for b in bundles]


def run_pipeline(
    bundle: ViewBundle,
    frames: Mapping[int, Image],
    params: PipelineParams,
    strategy: Optional[ViewStrategy] = None,
) -> PlateResult:
    return PlateRecognizer(params, strategy=strategy).run_bundle(bundle, frames)
