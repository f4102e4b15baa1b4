import json
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import ValidationError as PydanticValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(case_sensitive=True, extra="forbid")

    # Application settings
    PROJECT_NAME: str = "Multi-View Plate Reader"
    ENVIRONMENT: str = "development"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    SEED: int = 0

    # Geometry
    ASSOCIATION_WINDOW_SECONDS: float = 0.5
    NMS_IOU_THRESHOLD: float = 0.3
    ASYM_BETA: float = 0.5
    DETECTION_MATCH_IOU: float = 0.5

    # Classical plate localizer
    EDGE_THRESHOLD: float = 0.5
    DENSITY_WINDOW: int = 7
    DENSITY_THRESHOLD: float = 0.12
    MIN_PLATE_ASPECT: float = 0.9
    MAX_PLATE_ASPECT: float = 8.0
    MIN_PLATE_FILL: float = 0.5
    MIN_PLATE_AREA: int = 300

    # Fusion
    FUSION_TEMPERATURE: float = 1.0
    FUSION_MODE: Literal["analytic", "trained"] = "analytic"
    FUSION_STRATEGY: Literal["fuse", "best_view", "first_view"] = "fuse"

    # Plate geometry after alignment (width, height)
    CANONICAL_PLATE_WIDTH: int = 96
    CANONICAL_PLATE_HEIGHT: int = 32

    # OCR network (full-size defaults, training uses TRAIN_* overrides)
    OCR_CONV_CHANNELS: Tuple[int, int, int, int] = (40, 60, 80, 80)
    OCR_POOL_SHAPES: Tuple[Tuple[int, int], ...] = ((2, 1), (2, 1), (2, 2))
    OCR_LSTM_HIDDEN: int = 100
    OCR_NUM_CLASSES: int = 53
    BEAM_WIDTH: int = 8

    # Training
    LEARNING_RATE: float = 0.05
    BATCH_SIZE: int = 16
    EPOCHS: int = 25
    GRAD_CLIP: float = 5.0
    VALIDATION_FRACTION: float = 0.1
    TRAIN_CONV_CHANNELS: Tuple[int, int, int, int] = (8, 12, 16, 16)
    TRAIN_LSTM_HIDDEN: int = 32

    # Service / simulation
    NUM_WORKERS: int = 10
    QUEUE_DEPTH: int = 16
    MAX_UPLOAD_BYTES: int = 4 * 1024 * 1024
    MAX_FRAME_PIXELS: int = 4096 * 4096
    PARAMS_DIR: str = "params"
    HOST: str = "0.0.0.0"
    PORT: int = 8001


@lru_cache()
def get_settings() -> Settings:
    return Settings()


def load_settings(config_path: Optional[str | Path] = None) -> Settings:
    """
    Build settings from an optional JSON config file.

    Keys in the file are settings field names; they override values coming
    from the environment. Unknown keys are rejected.
    """
    if config_path is None:
        return get_settings()

    # Imported here to keep config importable before the error module
    from app.core.error_handlers import ValidationError

    path = Path(config_path)
    try:
        overrides = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"Could not read config file {path}", details={"reason": str(e)})

    if not isinstance(overrides, dict):
        raise ValidationError("Config file must contain a JSON object", details={"path": str(path)})

    try:
        return Settings(**overrides)
    except PydanticValidationError as e:
        raise ValidationError(
            "Invalid config file",
            details={"path": str(path), "errors": [err["msg"] for err in e.errors()]},
        )


# This is needed for imports in other files
settings = get_settings()
