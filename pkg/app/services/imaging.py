"""Image helpers: float images in [0, 1], PNG I/O, cropping and resizing."""

import io
from pathlib import Path
from typing import Tuple

import numpy as np
import numpy.typing as npt
from PIL import Image as PILImage
from scipy import ndimage

from app.core.error_handlers import DatasetError, InputTooSmallError

# 2-D (H, W) grayscale or 3-D (H, W, C) float64 array with values in [0, 1]
Image = npt.NDArray[np.float64]


def to_gray(img: Image) -> Image:
    if img.ndim == 2:
        return img
    return img.mean(axis=2)


def to_uint8(img: Image) -> npt.NDArray[np.uint8]:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(arr: npt.NDArray[np.uint8]) -> Image:
    return arr.astype(np.float64) / 255.0


def encode_png(img: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(img)).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> Image:
    with PILImage.open(io.BytesIO(data)) as pil:
        return from_uint8(np.asarray(pil.convert("L")))


def save_png(img: Image, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_png(img))
    except OSError as e:
        raise DatasetError(f"Cannot write image {path}", details={"reason": str(e)})


def load_png(path: Path) -> Image:
    try:
        return decode_png(path.read_bytes())
    except OSError as e:
        raise DatasetError(f"Cannot read image {path}", details={"reason": str(e)})


def resize_bilinear(img: Image, size: Tuple[int, int]) -> Image:
    """Resize to (width, height) with pixel-center aligned bilinear sampling."""
    width, height = size
    if width < 1 or height < 1:
        raise InputTooSmallError("Target size must be positive", details={"size": [width, height]})
    src = to_gray(img)
    h, w = src.shape
    if (h, w) == (height, width):
        return src.copy()
    rows = (np.arange(height) + 0.5) * (h / height) - 0.5
    cols = (np.arange(width) + 0.5) * (w / width) - 0.5
    rr, cc = np.meshgrid(np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1), indexing="ij")
    return ndimage.map_coordinates(src, [rr, cc], order=1, mode="nearest")


def crop(img: Image, x_min: float, y_min: float, x_max: float, y_max: float) -> Image:
    """Crop the integer pixel span covering the given box, clipped to the image."""
    h, w = img.shape[:2]
    x0 = max(0, int(np.floor(x_min)))
    y0 = max(0, int(np.floor(y_min)))
    x1 = min(w, int(np.ceil(x_max)))
    y1 = min(h, int(np.ceil(y_max)))
    if x1 <= x0 or y1 <= y0:
        raise InputTooSmallError("Crop box lies outside the image", details={"box": [x_min, y_min, x_max, y_max]})
    return img[y0:y1, x0:x1].copy()


def standardize(img: Image) -> Image:
    """Zero mean, unit variance; constant images map to zeros."""
    centered = img - img.mean()
    std = centered.std()
    return centered / std if std > 1e-6 else np.zeros_like(centered)
