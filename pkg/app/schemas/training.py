from typing import Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.core.config import Settings, settings


class DegradationRanges(BaseModel):
    """Upper bounds from which per-view degradations are sampled uniformly."""
    max_blur_sigma: float = Field(1.2, ge=0.0)
    max_noise_std: float = Field(0.04, ge=0.0)
    max_occlusion_fraction: float = Field(0.3, ge=0.0, lt=1.0)
    max_perspective_skew: float = Field(0.15, ge=0.0, le=0.5)
    brightness_range: Tuple[float, float] = (0.75, 1.1)

    @model_validator(mode="after")
    def check_brightness(self) -> "DegradationRanges":
        low, high = self.brightness_range
        if not 0.0 < low <= high:
            raise ValueError("brightness_range must satisfy 0 < low <= high")
        return self


class SynthConfig(BaseModel):
    """Scene counts and ranges for synthetic multi-view datasets."""
    num_scenes: int = Field(100, ge=0)
    views_per_scene: int = Field(3, ge=1)
    frame_width: int = Field(240, ge=64)
    frame_height: int = Field(160, ge=64)
    two_row_fraction: float = Field(0.3, ge=0.0, le=1.0)
    single_row_size: Tuple[int, int] = (150, 36)
    two_row_size: Tuple[int, int] = (80, 60)
    scene_interval: float = Field(2.0, gt=0.0)
    view_offset: float = Field(0.01, ge=0.0)
    # View 0 of every scene keeps a mild degradation profile
    clean_first_view: bool = True
    degradation: DegradationRanges = DegradationRanges()


class OcrTrainConfig(BaseModel):
    epochs: int = Field(settings.EPOCHS, ge=1)
    learning_rate: float = Field(settings.LEARNING_RATE, gt=0.0)
    batch_size: int = Field(settings.BATCH_SIZE, ge=1)
    grad_clip: float = Field(settings.GRAD_CLIP, gt=0.0)
    validation_fraction: float = Field(settings.VALIDATION_FRACTION, ge=0.0, lt=1.0)
    conv_channels: Tuple[int, int, int, int] = settings.TRAIN_CONV_CHANNELS
    lstm_hidden: int = Field(settings.TRAIN_LSTM_HIDDEN, ge=1)
    seed: int = settings.SEED

    @classmethod
    def from_settings(cls, config: Settings, seed: Optional[int] = None) -> "OcrTrainConfig":
        return cls(
            epochs=config.EPOCHS,
            learning_rate=config.LEARNING_RATE,
            batch_size=config.BATCH_SIZE,
            grad_clip=config.GRAD_CLIP,
            validation_fraction=config.VALIDATION_FRACTION,
            conv_channels=config.TRAIN_CONV_CHANNELS,
            lstm_hidden=config.TRAIN_LSTM_HIDDEN,
            seed=config.SEED if seed is None else seed,
        )


class ClassifierTrainConfig(BaseModel):
    epochs: int = Field(15, ge=1)
    learning_rate: float = Field(settings.LEARNING_RATE, gt=0.0)
    batch_size: int = Field(settings.BATCH_SIZE, ge=1)
    validation_fraction: float = Field(settings.VALIDATION_FRACTION, ge=0.0, lt=1.0)
    channels: Tuple[int, int] = (4, 8)
    seed: int = settings.SEED

    @classmethod
    def from_settings(cls, config: Settings, seed: Optional[int] = None) -> "ClassifierTrainConfig":
        return cls(
            learning_rate=config.LEARNING_RATE,
            batch_size=config.BATCH_SIZE,
            validation_fraction=config.VALIDATION_FRACTION,
            seed=config.SEED if seed is None else seed,
        )


class FuserTrainConfig(BaseModel):
    epochs: int = Field(20, ge=1)
    learning_rate: float = Field(0.5, gt=0.0)
    feature_channels: int = Field(4, ge=1)
    temperature: float = Field(settings.FUSION_TEMPERATURE, gt=0.0)
    validation_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    seed: int = settings.SEED

    @classmethod
    def from_settings(cls, config: Settings, seed: Optional[int] = None) -> "FuserTrainConfig":
        return cls(temperature=config.FUSION_TEMPERATURE, seed=config.SEED if seed is None else seed)


class SimulationConfig(BaseModel):
    num_cameras: int = Field(30, ge=1)
    num_workers: int = Field(settings.NUM_WORKERS, ge=1)
    duration: float = Field(10.0, ge=0.0)
    frame_interval: float = Field(0.5, gt=0.0)
    queue_depth: int = Field(settings.QUEUE_DEPTH, ge=1)
    # 0 submits frames as fast as possible, 1 replays in real time
    time_scale: float = Field(1.0, ge=0.0)
    # Random start offset per camera, as a fraction of frame_interval
    phase_jitter: float = Field(1.0, ge=0.0, le=1.0)
    seed: int = settings.SEED
