"""
Convolutional-recurrent plate reader.

conv -> pool(2,1) -> conv -> pool(2,1) -> conv -> pool(2,2) -> conv
-> mean over height -> BiLSTM -> dense softmax per column.
ReLU follows every convolution.
"""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from app.core.config import settings
from app.core.error_handlers import InputTooSmallError, ShapeMismatchError
from app.services.ctc import ProbMatrix
from app.services.neuralcore import layers
from app.services.neuralcore.lstm import bilstm_backward, bilstm_forward, init_bilstm_params
from app.services.neuralcore.tensor import Params, Tensor, glorot_uniform


class OcrNetConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    conv_channels: Tuple[int, int, int, int] = settings.OCR_CONV_CHANNELS
    pool_shapes: Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]] = settings.OCR_POOL_SHAPES
    lstm_hidden: int = settings.OCR_LSTM_HIDDEN
    num_classes: int = settings.OCR_NUM_CLASSES
    input_height: int = settings.CANONICAL_PLATE_HEIGHT
    input_channels: int = 1
    kernel_size: int = 3

    @field_validator("conv_channels", "pool_shapes")
    @classmethod
    def positive(cls, v):
        flat = np.asarray(v).ravel()
        if (flat < 1).any():
            raise ValueError("channels and pool windows must be positive")
        return v

    @model_validator(mode="after")
    def check_shapes(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must include blank and at least one symbol")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if self.lstm_hidden < 1:
            raise ValueError("lstm_hidden must be positive")
        return self

    def time_steps(self, width: int) -> int:
        for _, pw in self.pool_shapes:
            width = -(-width // pw)
        return width

    def min_input_width(self) -> int:
        return int(np.prod([pw for _, pw in self.pool_shapes]))


def init_ocr_params(config: OcrNetConfig, seed: int) -> Params:
    """Glorot-uniform weights and zero biases, in layer declaration order."""
    rng = np.random.default_rng(seed)
    k = config.kernel_size
    params: Params = {}
    cin = config.input_channels
    for index, cout in enumerate(config.conv_channels, start=1):
        params[f"conv{index}.kernel"] = glorot_uniform(rng, (k, k, cin, cout), k * k * cin, k * k * cout)
        params[f"conv{index}.bias"] = np.zeros(cout)
        cin = cout
    params.update(init_bilstm_params(rng, cin, config.lstm_hidden, "lstm"))
    params["dense.W"] = glorot_uniform(
        rng, (config.lstm_hidden, config.num_classes), config.lstm_hidden, config.num_classes
    )
    params["dense.b"] = np.zeros(config.num_classes)
    return params


def _as_batch(x: Tensor, config: OcrNetConfig) -> Tensor:
    if x.ndim == 2:
        x = x[None, :, :, None]
    elif x.ndim == 3:
        x = x[..., None] if config.input_channels == 1 and x.shape[-1] != 1 else x[None]
    if x.ndim != 4:
        raise ShapeMismatchError("OCR input must be an image or an NHWC batch", details={"shape": list(x.shape)})
    if x.shape[1] != config.input_height:
        raise ShapeMismatchError(
            "OCR input height does not match the network",
            details={"height": x.shape[1], "expected": config.input_height},
        )
    if x.shape[2] < config.min_input_width() or x.shape[-1] != config.input_channels:
        raise InputTooSmallError(
            "Image too small for the pooling stack",
            details={"shape": list(x.shape), "min_width": config.min_input_width()},
        )
    return x


def ocr_logits(x: Tensor, config: OcrNetConfig, params: Params) -> Tuple[Tensor, Dict[str, Any]]:
    """Batch forward to per-column logits [N, T, C] plus the cache backward needs."""
    x = _as_batch(x, config)
    cache: Dict[str, Any] = {"conv_in": [], "pre_relu": [], "pool_in": []}
    h = x
    for index in range(1, 5):
        cache["conv_in"].append(h)
        z = layers.conv2d_forward(h, params[f"conv{index}.kernel"], params[f"conv{index}.bias"])
        cache["pre_relu"].append(z)
        h = layers.relu_forward(z)
        if index <= len(config.pool_shapes):
            cache["pool_in"].append(h)
            h = layers.maxpool_forward(h, config.pool_shapes[index - 1])
    cache["collapse_shape"] = h.shape
    seq = layers.mean_collapse_forward(h, axis=1)
    hidden, cache["lstm"] = bilstm_forward(seq, params, "lstm")
    cache["hidden"] = hidden
    logits = layers.dense_forward(hidden, params["dense.W"], params["dense.b"])
    return logits, cache


def ocr_backward(dlogits: Tensor, cache: Dict[str, Any], config: OcrNetConfig, params: Params) -> Params:
    grads: Params = {}
    dhidden, grads["dense.W"], grads["dense.b"] = layers.dense_backward(cache["hidden"], params["dense.W"], dlogits)
    dseq, lstm_grads = bilstm_backward(dhidden, cache["lstm"], params, "lstm")
    grads.update(lstm_grads)
    dh = layers.mean_collapse_backward(cache["collapse_shape"], 1, dseq)
    for index in range(4, 0, -1):
        if index <= len(config.pool_shapes):
            dh = layers.maxpool_backward(cache["pool_in"][index - 1], config.pool_shapes[index - 1], dh)
        dz = layers.relu_backward(cache["pre_relu"][index - 1], dh)
        dh, grads[f"conv{index}.kernel"], grads[f"conv{index}.bias"] = layers.conv2d_backward(
            cache["conv_in"][index - 1], params[f"conv{index}.kernel"], dz
        )
    return {name: grads[name] for name in params}


def ocr_forward_batch(x: Tensor, config: OcrNetConfig, params: Params) -> Tensor:
    logits, _ = ocr_logits(x, config, params)
    return layers.softmax(logits)


def ocr_forward(img: Tensor, config: OcrNetConfig, params: Params) -> ProbMatrix:
    return ProbMatrix(ocr_forward_batch(img, config, params)[0])


def toy_config(
    conv_channels: Tuple[int, int, int, int] = (4, 6, 8, 8),
    lstm_hidden: int = 8,
    num_classes: int = 5,
    input_height: int = 8,
    pool_shapes: Optional[List[Tuple[int, int]]] = None,
) -> OcrNetConfig:
    return OcrNetConfig(
        conv_channels=conv_channels,
        lstm_hidden=lstm_hidden,
        num_classes=num_classes,
        input_height=input_height,
        pool_shapes=tuple(pool_shapes) if pool_shapes else ((2, 1), (2, 1), (2, 2)),
    )
