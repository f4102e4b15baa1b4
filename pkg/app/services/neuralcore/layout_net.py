"""Two-class plate layout network: two conv/pool stages, width mean, dense softmax."""

from typing import Any, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.config import settings
from app.core.error_handlers import ShapeMismatchError
from app.services.neuralcore import layers
from app.services.neuralcore.tensor import Params, Tensor, glorot_uniform

LAYOUT_CLASSES = 2
_POOL = (2, 2)


class LayoutNetConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    channels: Tuple[int, int] = (4, 8)
    input_width: int = settings.CANONICAL_PLATE_WIDTH
    input_height: int = settings.CANONICAL_PLATE_HEIGHT
    kernel_size: int = 3

    @model_validator(mode="after")
    def check(self):
        if min(self.channels) < 1 or self.input_width < 4 or self.input_height < 4:
            raise ValueError("channels must be positive and the input at least 4x4")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        return self

    @property
    def feature_rows(self) -> int:
        half = -(-self.input_height // 2)
        return -(-half // 2)


def init_layout_params(config: LayoutNetConfig, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    k = config.kernel_size
    c1, c2 = config.channels
    features = config.feature_rows * c2
    return {
        "conv1.kernel": glorot_uniform(rng, (k, k, 1, c1), k * k, k * k * c1),
        "conv1.bias": np.zeros(c1),
        "conv2.kernel": glorot_uniform(rng, (k, k, c1, c2), k * k * c1, k * k * c2),
        "conv2.bias": np.zeros(c2),
        "dense.W": glorot_uniform(rng, (features, LAYOUT_CLASSES), features, LAYOUT_CLASSES),
        "dense.b": np.zeros(LAYOUT_CLASSES),
    }


def layout_logits(x: Tensor, config: LayoutNetConfig, params: Params) -> Tuple[Tensor, Dict[str, Any]]:
    if x.ndim == 2:
        x = x[None]
    if x.ndim == 3:
        x = x[..., None]
    if x.shape[1:] != (config.input_height, config.input_width, 1):
        raise ShapeMismatchError(
            "Layout input must be canonical plate size",
            details={"shape": list(x.shape), "expected": [config.input_height, config.input_width]},
        )
    cache: Dict[str, Any] = {"x": x}
    z1 = layers.conv2d_forward(x, params["conv1.kernel"], params["conv1.bias"])
    a1 = layers.relu_forward(z1)
    p1 = layers.maxpool_forward(a1, _POOL)
    z2 = layers.conv2d_forward(p1, params["conv2.kernel"], params["conv2.bias"])
    a2 = layers.relu_forward(z2)
    p2 = layers.maxpool_forward(a2, _POOL)
    rows = layers.mean_collapse_forward(p2, axis=2)
    flat = rows.reshape(rows.shape[0], -1)
    logits = layers.dense_forward(flat, params["dense.W"], params["dense.b"])
    cache.update(z1=z1, a1=a1, p1=p1, z2=z2, a2=a2, p2_shape=p2.shape, rows_shape=rows.shape, flat=flat)
    return logits, cache


def layout_backward(dlogits: Tensor, cache: Dict[str, Any], params: Params) -> Params:
    grads: Params = {}
    dflat, grads["dense.W"], grads["dense.b"] = layers.dense_backward(cache["flat"], params["dense.W"], dlogits)
    drows = dflat.reshape(cache["rows_shape"])
    dp2 = layers.mean_collapse_backward(cache["p2_shape"], 2, drows)
    da2 = layers.maxpool_backward(cache["a2"], _POOL, dp2)
    dz2 = layers.relu_backward(cache["z2"], da2)
    dp1, grads["conv2.kernel"], grads["conv2.bias"] = layers.conv2d_backward(cache["p1"], params["conv2.kernel"], dz2)
    da1 = layers.maxpool_backward(cache["a1"], _POOL, dp1)
    dz1 = layers.relu_backward(cache["z1"], da1)
    _, grads["conv1.kernel"], grads["conv1.bias"] = layers.conv2d_backward(cache["x"], params["conv1.kernel"], dz1)
    return {name: grads[name] for name in params}


def layout_probabilities(x: Tensor, config: LayoutNetConfig, params: Params) -> Tensor:
    logits, _ = layout_logits(x, config, params)
    return layers.softmax(logits)
