"""Plate localization, layout, multi-view fusion, recognition and scoring."""

from app.services.pipeline.alignment import AlignedPlate, rectify_and_align
from app.services.pipeline.evaluation import compare_strategies, evaluate
from app.services.pipeline.layout import LayoutClassifier, classify_layout, train_classifier
from app.services.pipeline.localizer import detect_plates
from app.services.pipeline.multiview import ViewStrategy, fuse_views
from app.services.pipeline.params import PipelineParams
from app.services.pipeline.recognizer import OcrModel, recognize, train_ocr
from app.services.pipeline.runner import PlateRecognizer, PlateResult, run_pipeline

__all__ = [
    "AlignedPlate",
    "LayoutClassifier",
    "OcrModel",
    "PipelineParams",
    "PlateRecognizer",
    "PlateResult",
    "ViewStrategy",
    "classify_layout",
    "compare_strategies",
    "detect_plates",
    "evaluate",
    "fuse_views",
    "rectify_and_align",
    "recognize",
    "run_pipeline",
    "train_classifier",
    "train_ocr",
]
