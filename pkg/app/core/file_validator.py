"""
Uploaded Frame Validator
Checks size and content type of uploaded frames and decodes them
"""

import io
from typing import Tuple

import filetype
from fastapi import UploadFile
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from app.core.config import settings
from app.core.error_handlers import FileUploadError, PayloadTooLargeError
from app.services.imaging import Image, decode_png


class FileValidator:
    """Validates uploaded frames before they reach a worker"""

    # Frames travel as PNG bytes
    ALLOWED_IMAGE_TYPES = {"image/png"}

    MIN_SIDE = 64

    def __init__(self, max_size: int = settings.MAX_UPLOAD_BYTES, max_pixels: int = settings.MAX_FRAME_PIXELS):
        self.max_size = max_size
        self.max_pixels = max_pixels

    def check_content(self, content: bytes) -> str:
        """Size and content-type checks; returns the detected MIME type."""
        if not content:
            raise FileUploadError("Empty file uploaded")

        if len(content) > self.max_size:
            raise PayloadTooLargeError(
                f"File too large. Maximum size is {self.max_size} bytes",
                details={"file_size": len(content), "max_size": self.max_size},
            )

        # Checks the actual bytes, not the declared content type
        kind = filetype.guess(content)
        mime = kind.mime if kind else None
        if mime not in self.ALLOWED_IMAGE_TYPES:
            raise FileUploadError(
                f"Invalid file type. Detected: {mime}",
                details={"detected_type": mime, "allowed_types": sorted(self.ALLOWED_IMAGE_TYPES)},
            )
        return mime

    def decode(self, content: bytes) -> Image:
        try:
            # Header only; pixel data is not read until convert
            with PILImage.open(io.BytesIO(content)) as pil:
                width, height = pil.size
            if width * height > self.max_pixels:
                raise PayloadTooLargeError(
                    f"Frame too large. Maximum is {self.max_pixels} pixels",
                    details={"width": width, "height": height, "max_pixels": self.max_pixels},
                )
            frame = decode_png(content)
        except PILImage.DecompressionBombError as e:
            raise PayloadTooLargeError("Frame too large", details={"reason": str(e), "max_pixels": self.max_pixels})
        except (UnidentifiedImageError, OSError, ValueError) as e:
            raise FileUploadError("Could not decode image", details={"reason": str(e)})

        if min(frame.shape) < self.MIN_SIDE:
            raise FileUploadError(
                f"Frame must be at least {self.MIN_SIDE}x{self.MIN_SIDE} pixels",
                details={"shape": list(frame.shape)},
            )
        return frame

    async def validate_image(self, file: UploadFile) -> Tuple[Image, str]:
        """Read, check and decode an uploaded frame."""
        # Read one byte past the limit so oversized bodies are not held in full
        content = await file.read(self.max_size + 1)
        mime = self.check_content(content)
        return self.decode(content), mime

