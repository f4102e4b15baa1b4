from typing import Dict, List

from pydantic import BaseModel, Field


class DetectionOut(BaseModel):
    box: List[float] = Field(min_length=4, max_length=4, description="x_min, y_min, x_max, y_max in pixels")
    confidence: float
    class_id: int


class RecognizeResponse(BaseModel):
    camera_id: int
    worker_id: int
    detections: List[DetectionOut]
    text: str
    confidence: float = Field(ge=0.0, le=1.0)
    processing_ms: float


class WorkerStats(BaseModel):
    worker_id: int
    cameras: List[int] = Field(default_factory=list)
    accepted: int = 0
    frames_processed: int = 0
    errors: int = 0
    dropped: int = 0
    in_flight: int = 0
    queue_depth: int = 0
    queue_capacity: int = 0
    p50: float = 0.0
    p90: float = 0.0
    p99: float = 0.0


class StatsResponse(BaseModel):
    workers: List[WorkerStats]
    total_processed: int
    total_dropped: int


class HealthResponse(BaseModel):
    status: str
    workers: int
    model_loaded: bool


class SimulationReport(BaseModel):
    num_cameras: int
    num_workers: int
    duration: float
    frames_offered: int
    frames_processed: int
    frames_dropped: int
    wall_seconds: float
    throughput_fps: float
    routing: Dict[int, int] = Field(default_factory=dict, description="camera id -> worker id")
    workers: List[WorkerStats] = Field(default_factory=list)
