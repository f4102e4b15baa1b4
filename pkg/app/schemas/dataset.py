from typing import List, Optional, Tuple

from pydantic import BaseModel, Field


class ManifestEntry(BaseModel):
    """One line of a dataset manifest (JSON lines), one per rendered view."""
    image_path: str
    scene_id: int = Field(ge=0)
    view_id: int = Field(ge=0)
    timestamp: float
    gt_box: List[float] = Field(min_length=4, max_length=4)
    gt_text: str = Field(min_length=1, max_length=10)
    layout: str
    split_index: Optional[int] = None
    plate_size: Tuple[int, int]
    seed: int
    blur_sigma: float = 0.0
    noise_std: float = 0.0
    occlusion_fraction: float = 0.0
    perspective_skew: float = 0.0
    brightness_scale: float = 1.0
