from fastapi import APIRouter, Depends, File, Form, Request, UploadFile

from app.core.file_validator import FileValidator
from app.core.logger import get_logger
from app.schemas.recognition import HealthResponse, RecognizeResponse, StatsResponse
from app.services.recognition_service import RecognitionService

router = APIRouter()
logger = get_logger(__name__)


def get_service(request: Request) -> RecognitionService:
    return request.app.state.service


@router.post(
    "/recognize",
    response_model=RecognizeResponse,
    responses={
        400: {"description": "Malformed request or undecodable image"},
        413: {"description": "Image larger than MAX_UPLOAD_BYTES or MAX_FRAME_PIXELS"},
        503: {"description": "No trained parameters loaded, or the frame was dropped by a full worker queue"},
    },
)
async def recognize_frame(
    file: UploadFile = File(..., description="PNG frame"),
    camera_id: int = Form(0, ge=0),
    service: RecognitionService = Depends(get_service),
):
    """
    Detect and read the most confident plate in one camera frame.

    The frame is queued on the worker serving `camera_id`.
    """
    frame, _ = await FileValidator().validate_image(file)
    return await service.recognize(camera_id, frame)


@router.get("/stats", response_model=StatsResponse)
async def worker_stats(service: RecognitionService = Depends(get_service)):
    """Per-worker counters and latency quantiles (seconds)."""
    return service.stats()


@router.get("/healthz", response_model=HealthResponse)
async def health(service: RecognitionService = Depends(get_service)):
    return service.health()
