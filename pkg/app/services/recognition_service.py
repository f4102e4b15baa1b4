import asyncio
from typing import Optional

from app.core.config import settings
from app.core.error_handlers import UntrainedModelError
from app.core.logger import get_logger
from app.schemas.recognition import (
    DetectionOut,
    HealthResponse,
    RecognizeResponse,
    StatsResponse,
)
from app.services.camsim import WorkerPool
from app.services.imaging import Image
from app.services.pipeline.runner import FrameRecognition, PlateRecognizer

logger = get_logger(__name__)


class RecognitionService:
    """Worker pool in front of a shared PlateRecognizer."""

    def __init__(
        self,
        recognizer: Optional[PlateRecognizer] = None,
        num_workers: int = settings.NUM_WORKERS,
        queue_depth: int = settings.QUEUE_DEPTH,
    ):
        self.recognizer = recognizer
        self.pool = WorkerPool(num_workers, queue_depth, self._process)

    def _process(self, frame: Image) -> FrameRecognition:
        return self.recognizer.recognize_frame(frame)

    def start(self) -> None:
        self.pool.start()

    def stop(self) -> None:
        self.pool.stop()

    async def recognize(self, camera_id: int, frame: Image) -> RecognizeResponse:
        if self.recognizer is None:
            raise UntrainedModelError("No trained parameters are loaded")
        worker_id, future = self.pool.submit(camera_id, frame)
        result: FrameRecognition = await asyncio.wrap_future(future)
        return RecognizeResponse(
            camera_id=camera_id,
            worker_id=worker_id,
            detections=[
                DetectionOut(box=d.box.as_list(), confidence=d.confidence, class_id=int(d.class_id))
                for d in result.detections
            ],
            text=result.text,
            confidence=result.confidence,
            processing_ms=result.processing_ms,
        )

    def stats(self) -> StatsResponse:
        workers = self.pool.stats()
        return StatsResponse(
            workers=workers,
            total_processed=sum(w.frames_processed for w in workers),
            total_dropped=sum(w.dropped for w in workers),
        )

    def health(self) -> HealthResponse:
        return HealthResponse(
            status="ok" if self.recognizer is not None else "degraded",
            workers=self.pool.num_workers,
            model_loaded=self.recognizer is not None,
        )
