"""
Centralized Error Handling
Domain errors and the HTTP handlers that format them consistently
"""

import logging

from fastapi import HTTPException, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from app.core.logger import get_logger

logger = get_logger(__name__)


class AppException(Exception):
    """Base exception for application-specific errors"""
    def __init__(self, message: str, status_code: int = 500, details: dict = None):
        self.message = message
        self.status_code = status_code
        self.details = details or {}
        super().__init__(self.message)


class ValidationError(AppException):
    """Data validation errors"""
    def __init__(self, message: str = "Validation failed", details: dict = None):
        super().__init__(message, status.HTTP_422_UNPROCESSABLE_ENTITY, details)


class InvalidBoxError(ValidationError):
    """Box with non-finite coordinates or non-positive area"""
    def __init__(self, message: str = "Invalid box", details: dict = None):
        super().__init__(message, details)


class ShapeMismatchError(ValidationError):
    """Arrays that must share a shape do not"""
    def __init__(self, message: str = "Shape mismatch", details: dict = None):
        super().__init__(message, details)


class UnknownCharacterError(ValidationError):
    """Character outside the configured charset"""
    def __init__(self, symbol: str, details: dict = None):
        self.symbol = symbol
        super().__init__(f"Unknown character {symbol!r}", {"symbol": symbol, **(details or {})})


class InvalidParameterError(ValidationError):
    """Out-of-range numeric parameter (temperature, beta, threshold, ...)"""
    def __init__(self, message: str = "Invalid parameter", details: dict = None):
        super().__init__(message, details)


class InputTooSmallError(ValidationError):
    """Image smaller than an operation's minimum input"""
    def __init__(self, message: str = "Input too small", details: dict = None):
        super().__init__(message, details)


class InfeasibleLabelError(AppException):
    """Label cannot be aligned to the available timesteps"""
    def __init__(self, message: str = "Infeasible label for sequence length", details: dict = None):
        super().__init__(message, status.HTTP_422_UNPROCESSABLE_ENTITY, details)


class InstanceTooLargeError(AppException):
    """Brute-force enumeration would exceed MAX_BRUTE_FORCE_PATHS"""
    def __init__(self, message: str = "Instance too large to enumerate", details: dict = None):
        super().__init__(message, status.HTTP_422_UNPROCESSABLE_ENTITY, details)


class TrainingError(AppException):
    """Training cannot proceed"""
    def __init__(self, message: str = "Training failed", details: dict = None):
        super().__init__(message, status.HTTP_500_INTERNAL_SERVER_ERROR, details)


class NonFiniteGradientError(TrainingError):
    """Gradient contains NaN or infinity"""
    def __init__(self, message: str = "Non-finite gradient", details: dict = None):
        super().__init__(message, details)


class EmptyDatasetError(TrainingError):
    """Trainer received no usable samples"""
    def __init__(self, message: str = "Empty dataset", details: dict = None):
        super().__init__(message, details)


class UntrainedModelError(AppException):
    """Model parameters were never trained"""
    def __init__(self, message: str = "Model parameters are untrained", details: dict = None):
        super().__init__(message, status.HTTP_503_SERVICE_UNAVAILABLE, details)


class EvaluationError(AppException):
    """Results cannot be aligned with ground truth"""
    def __init__(self, message: str = "Evaluation failed", details: dict = None):
        super().__init__(message, status.HTTP_422_UNPROCESSABLE_ENTITY, details)


class DatasetError(AppException):
    """Manifest or image files cannot be read or written"""
    def __init__(self, message: str = "Dataset I/O failed", details: dict = None):
        super().__init__(message, status.HTTP_500_INTERNAL_SERVER_ERROR, details)


class CheckpointError(AppException):
    """Checkpoint file is malformed or incompatible"""
    def __init__(self, message: str = "Checkpoint error", details: dict = None):
        super().__init__(message, status.HTTP_500_INTERNAL_SERVER_ERROR, details)


class FileUploadError(AppException):
    """File upload related errors"""
    def __init__(self, message: str = "File upload failed", details: dict = None):
        super().__init__(message, status.HTTP_400_BAD_REQUEST, details)


class PayloadTooLargeError(AppException):
    """Uploaded image exceeds the documented size limit"""
    def __init__(self, message: str = "Payload too large", details: dict = None):
        super().__init__(message, status.HTTP_413_REQUEST_ENTITY_TOO_LARGE, details)


class FrameDroppedError(AppException):
    """Frame was evicted from a full worker queue before processing"""
    def __init__(self, message: str = "Frame dropped by a full worker queue", details: dict = None):
        super().__init__(message, status.HTTP_503_SERVICE_UNAVAILABLE, details)


# Error response formatter
def format_error_response(
    status_code: int,
    message: str,
    details: dict = None,
    path: str = None
) -> dict:
    """Format error response consistently"""
    response = {
        "error": {
            "status_code": status_code,
            "message": message,
            "type": "error"
        }
    }

    if details:
        response["error"]["details"] = details

    if path:
        response["error"]["path"] = path

    return response


# Exception handlers for FastAPI
async def app_exception_handler(request: Request, exc: AppException):
    """Handler for custom application exceptions"""
    logger.error(
        f"{type(exc).__name__}: {exc.message}",
        extra={
            "status_code": exc.status_code,
            "path": request.url.path,
            "details": exc.details
        }
    )

    return JSONResponse(
        status_code=exc.status_code,
        content=format_error_response(
            status_code=exc.status_code,
            message=exc.message,
            details=exc.details,
            path=request.url.path
        )
    )


async def validation_exception_handler(request: Request, exc: RequestValidationError):
    """Handler for request validation errors; malformed requests are client errors"""
    errors = []
    for error in exc.errors():
        errors.append({
            "field": " -> ".join(str(loc) for loc in error["loc"]),
            "message": error["msg"],
            "type": error["type"]
        })

    error_details = "\n".join([
        f"  - Field '{err['field']}': {err['message']} (type: {err['type']})"
        for err in errors
    ])
    logger.warning(
        f"Validation error on {request.url.path}:\n{error_details}"
    )

    return JSONResponse(
        status_code=status.HTTP_400_BAD_REQUEST,
        content=format_error_response(
            status_code=status.HTTP_400_BAD_REQUEST,
            message="Request validation failed",
            details={"validation_errors": errors},
            path=request.url.path
        )
    )


async def http_exception_handler(request: Request, exc: HTTPException):
    """Handler for FastAPI HTTP exceptions"""
    logger.error(
        f"HTTP Exception: {exc.detail}",
        extra={
            "status_code": exc.status_code,
            "path": request.url.path
        }
    )

    return JSONResponse(
        status_code=exc.status_code,
        content=format_error_response(
            status_code=exc.status_code,
            message=str(exc.detail),
            path=request.url.path
        )
    )


async def general_exception_handler(request: Request, exc: Exception):
    """Handler for unexpected exceptions"""
    logger.exception(
        f"Unexpected error on {request.url.path}: {str(exc)}",
        exc_info=exc
    )

    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content=format_error_response(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            message="An unexpected error occurred. Please try again later.",
            details={"error_type": type(exc).__name__} if logger.level == logging.DEBUG else None,
            path=request.url.path
        )
    )
