from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from app.core.logger import get_logger
from app.services.fusion import FUSER_KIND
from app.services.neuralcore.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.services.neuralcore.tensor import Params
from app.services.pipeline.layout import LAYOUT_KIND, LayoutClassifier
from app.services.pipeline.recognizer import OCR_KIND, OcrModel

logger = get_logger(__name__)

OCR_FILE = "ocr.ckpt"
LAYOUT_FILE = "layout.ckpt"
FUSER_FILE = "fuser.ckpt"


@dataclass
class PipelineParams:
    """Everything the recognition pipeline loads from a params directory."""
    ocr: OcrModel
    layout: Optional[LayoutClassifier] = None
    fuser: Optional[Params] = None

    def save(self, directory: Path) -> None:
        directory = Path(directory)
        save_checkpoint(directory / OCR_FILE, self.ocr.to_checkpoint())
        if self.layout is not None:
            save_checkpoint(directory / LAYOUT_FILE, self.layout.to_checkpoint())
        if self.fuser is not None:
            save_checkpoint(directory / FUSER_FILE, Checkpoint(FUSER_KIND, {}, self.fuser))

    @classmethod
    def load(cls, directory: Path) -> "PipelineParams":
        """The OCR checkpoint is required; layout and fuser checkpoints are optional."""
        directory = Path(directory)
        ocr = OcrModel.from_checkpoint(load_checkpoint(directory / OCR_FILE, OCR_KIND))

        layout = None
        if (directory / LAYOUT_FILE).exists():
            layout = LayoutClassifier.from_checkpoint(load_checkpoint(directory / LAYOUT_FILE, LAYOUT_KIND))
        else:
            logger.warning(f"No layout checkpoint in {directory}; plates are read as single-row")

        fuser = None
        if (directory / FUSER_FILE).exists():
            fuser = load_checkpoint(directory / FUSER_FILE, FUSER_KIND).params

        return cls(ocr, layout, fuser)
