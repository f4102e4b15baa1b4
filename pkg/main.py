from contextlib import asynccontextmanager
from typing import Optional

import uvicorn
from fastapi import FastAPI
from fastapi.exceptions import HTTPException, RequestValidationError

from app.api import api_router
from app.core.config import Settings, settings as default_settings
from app.core.logger import get_logger

# Import error handlers
from app.core.error_handlers import (
    AppException,
    app_exception_handler,
    general_exception_handler,
    http_exception_handler,
    validation_exception_handler,
)
from app.services.pipeline.params import PipelineParams
from app.services.pipeline.runner import PlateRecognizer
from app.services.recognition_service import RecognitionService

# Initialize logger
logger = get_logger(__name__)


def load_recognizer(config: Settings) -> Optional[PlateRecognizer]:
    """Recognizer from PARAMS_DIR, or None when no usable checkpoint is there."""
    try:
        return PlateRecognizer(PipelineParams.load(config.PARAMS_DIR), config)
    except AppException as e:
        logger.warning(f"Serving without a model: {e.message}")
        return None


def create_app(
    recognizer: Optional[PlateRecognizer] = None,
    config: Settings = default_settings,
    num_workers: Optional[int] = None,
    queue_depth: Optional[int] = None,
) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info("=" * 60)
        logger.info(f"Starting {config.PROJECT_NAME}...")
        logger.info("=" * 60)

        service = RecognitionService(
            recognizer if recognizer is not None else load_recognizer(config),
            num_workers or config.NUM_WORKERS,
            queue_depth or config.QUEUE_DEPTH,
        )
        service.start()
        app.state.service = service
        logger.info("Application startup completed successfully")
        try:
            yield
        finally:
            logger.info("=" * 60)
            logger.info(f"Shutting down {config.PROJECT_NAME}...")
            logger.info("=" * 60)
            service.stop()

    app = FastAPI(
        title=config.PROJECT_NAME,
        description="Multi-view license plate recognition service",
        version="0.1.0",
        docs_url="/docs",
        redoc_url="/redoc",
        openapi_url="/openapi.json",
        lifespan=lifespan,
    )

    # Register exception handlers
    app.add_exception_handler(AppException, app_exception_handler)
    app.add_exception_handler(RequestValidationError, validation_exception_handler)
    app.add_exception_handler(HTTPException, http_exception_handler)
    app.add_exception_handler(Exception, general_exception_handler)

    # Include API routers
    app.include_router(api_router)
    return app


app = create_app()


if __name__ == "__main__":
    uvicorn.run(
        "main:app",
        host=default_settings.HOST,
        port=default_settings.PORT,
        reload=False,
        log_level="info"
    )
