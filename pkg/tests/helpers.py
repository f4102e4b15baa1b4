import time

import numpy as np

from app.services.geometry import Box, Detection
from app.services.pipeline.runner import FrameRecognition


def numeric_grad(f, x: np.ndarray, h: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences of the scalar f() with respect to x, perturbed in place."""
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size) if indices is None else indices:
        old = flat_x[i]
        flat_x[i] = old + h
        plus = f()
        flat_x[i] = old - h
        minus = f()
        flat_x[i] = old
        flat_g[i] = (plus - minus) / (2.0 * h)
    return grad


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-4) -> float:
    """Relative error of the norms; below `floor` it degrades to an absolute error."""
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), floor))


class StubRecognizer:
    """Stands in for PlateRecognizer in service tests."""

    def __init__(self, text: str = "29A12345", delay: float = 0.0):
        self.text = text
        self.delay = delay

    def recognize_frame(self, frame, view_id: int = 0) -> FrameRecognition:
        if self.delay:
            time.sleep(self.delay)
        h, w = frame.shape[:2]
        detection = Detection(Box(0.0, 0.0, float(w), float(h)), 0.5, view_id=view_id)
        return FrameRecognition([detection], self.text, 0.9, 1.0)
