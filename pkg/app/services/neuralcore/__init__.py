"""Small float64 neural network library with handwritten backward passes."""

from app.services.neuralcore.layers import (
    LabelDistribution,
    ce_loss,
    conv2d_forward,
    dense_softmax,
    maxpool_forward,
)
from app.services.neuralcore.lstm import bilstm_forward
from app.services.neuralcore.ocr_net import OcrNetConfig, init_ocr_params, ocr_forward
from app.services.neuralcore.optim import sgd_step
from app.services.neuralcore.tensor import Params, Tensor

__all__ = [
    "LabelDistribution",
    "OcrNetConfig",
    "Params",
    "Tensor",
    "bilstm_forward",
    "ce_loss",
    "conv2d_forward",
    "dense_softmax",
    "init_ocr_params",
    "maxpool_forward",
    "ocr_forward",
    "sgd_step",
]
