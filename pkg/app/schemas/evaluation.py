from typing import List, Optional

from pydantic import BaseModel, Field


class EvalReport(BaseModel):
    """Detection and recognition scores over a set of scenes."""
    strategy: Optional[str] = None
    num_scenes: int = Field(0, ge=0)

    # Detection, matched per view at IoU >= the match threshold
    tp: int = Field(0, ge=0)
    fp: int = Field(0, ge=0)
    fn: int = Field(0, ge=0)
    precision: float = Field(0.0, ge=0.0, le=1.0)
    recall: float = Field(0.0, ge=0.0, le=1.0)
    f1: float = Field(0.0, ge=0.0, le=1.0)

    # Recognition
    plate_exact_match_rate: float = Field(0.0, ge=0.0, le=1.0)
    character_accuracy: float = Field(0.0, ge=0.0, le=1.0)
    num_characters: int = Field(0, ge=0)
    substitutions: int = Field(0, ge=0)
    insertions: int = Field(0, ge=0)
    deletions: int = Field(0, ge=0)

    # Row 0 holds insertions, column 0 deletions; index k is charset[k - 1]
    charset: str = ""
    confusion: List[List[int]] = Field(default_factory=list)
