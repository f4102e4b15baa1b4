"""
Information-weighted fusion of two plate views.

Each view gets a texture score g from a five-level gradient pyramid. The
softmax of the scores over a temperature c gives the weights of a
weighted squared-error loss, whose minimizer is the weighted average of
the views. A small gated convolutional fuser can be trained against the
same loss.
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from app.core.config import settings
from app.core.error_handlers import (
    EmptyDatasetError,
    InputTooSmallError,
    InvalidParameterError,
    ShapeMismatchError,
)
from app.core.logger import get_logger
from app.schemas.training import FuserTrainConfig
from app.services.imaging import Image, to_gray
from app.services.neuralcore import layers
from app.services.neuralcore.checkpoint import Checkpoint
from app.services.neuralcore.optim import sgd_step
from app.services.neuralcore.tensor import Params, glorot_uniform

logger = get_logger(__name__)

PYRAMID_LEVELS = 5
MIN_PYRAMID_SIDE = 16
FUSER_KIND = "fuser"
_WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FeaturePyramid:
    levels: Tuple[Image, ...]

    def __post_init__(self) -> None:
        if len(self.levels) != PYRAMID_LEVELS:
            raise InvalidParameterError(f"A pyramid has exactly {PYRAMID_LEVELS} levels")

    @property
    def shapes(self) -> List[Tuple[int, int]]:
        return [lvl.shape for lvl in self.levels]


@dataclass(frozen=True)
class InfoMeasure:
    g: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.g) and self.g >= 0.0):
            raise InvalidParameterError("Information measure must be finite and non-negative", details={"g": self.g})


@dataclass(frozen=True)
class FusionWeights:
    w1: float
    w2: float
    c: float = 1.0

    def __post_init__(self) -> None:
        if not self.c > 0.0:
            raise InvalidParameterError("Temperature must be positive", details={"c": self.c})
        if self.w1 < 0.0 or self.w2 < 0.0 or abs(self.w1 + self.w2 - 1.0) > _WEIGHT_TOLERANCE:
            raise InvalidParameterError("Fusion weights must be non-negative and sum to 1")


def _gradient_magnitude(img: Image) -> Image:
    return np.hypot(ndimage.sobel(img, axis=1, mode="nearest"), ndimage.sobel(img, axis=0, mode="nearest"))


def feature_pyramid(img: Image) -> FeaturePyramid:
    gray = to_gray(np.asarray(img, dtype=np.float64))
    if min(gray.shape) < MIN_PYRAMID_SIDE:
        raise InputTooSmallError(
            f"Image must be at least {MIN_PYRAMID_SIDE}x{MIN_PYRAMID_SIDE}",
            details={"shape": list(gray.shape)},
        )
    levels = []
    current = gray
    for level in range(PYRAMID_LEVELS):
        levels.append(_gradient_magnitude(current))
        if level < PYRAMID_LEVELS - 1:
            current = ndimage.gaussian_filter(current, sigma=1.0, mode="nearest")[::2, ::2]
    return FeaturePyramid(tuple(levels))


def info_measure(pyramid: FeaturePyramid) -> InfoMeasure:
    return InfoMeasure(float(np.mean([np.mean(lvl ** 2) for lvl in pyramid.levels])))


def information(img: Image) -> float:
    return info_measure(feature_pyramid(img)).g


def _score(g: Union[InfoMeasure, float]) -> float:
    return g.g if isinstance(g, InfoMeasure) else float(g)


def fusion_weights(g1: Union[InfoMeasure, float], g2: Union[InfoMeasure, float], c: float = settings.FUSION_TEMPERATURE) -> FusionWeights:
    """Softmax over (g1 / c, g2 / c)."""
    if not c > 0.0:
        raise InvalidParameterError("Temperature must be positive", details={"c": c})
    z = np.array([_score(g1), _score(g2)]) / c
    e = np.exp(z - z.max())
    w1 = float(e[0] / e.sum())
    return FusionWeights(w1, 1.0 - w1, c)


def _check_same_shape(*images: Image) -> None:
    shapes = {np.shape(img) for img in images}
    if len(shapes) != 1:
        raise ShapeMismatchError("Fusion inputs must share a shape", details={"shapes": [list(s) for s in shapes]})


def fusion_loss(f: Image, i1: Image, i2: Image, w: FusionWeights) -> float:
    _check_same_shape(f, i1, i2)
    return float(w.w1 * np.mean((f - i1) ** 2) + w.w2 * np.mean((f - i2) ** 2))


def fusion_loss_grad(f: Image, i1: Image, i2: Image, w: FusionWeights) -> Image:
    """Gradient of fusion_loss with respect to every pixel of f."""
    _check_same_shape(f, i1, i2)
    return 2.0 / f.size * (w.w1 * (f - i1) + w.w2 * (f - i2))


def fuse_analytic(i1: Image, i2: Image, w: FusionWeights) -> Image:
    _check_same_shape(i1, i2)
    if w.w1 == 1.0:
        return np.array(i1, dtype=np.float64, copy=True)
    # exact on i1 == i2 and on w1 == 0
    return i2 + w.w1 * (i1 - i2)


def fuse_pair(i1: Image, i2: Image, c: float = settings.FUSION_TEMPERATURE) -> Image:
    return fuse_analytic(i1, i2, fusion_weights(information(i1), information(i2), c))


# ---------------------------------------------------------------- trained fuser

class FuserTrainResult(NamedTuple):
    params: Params
    loss_curve: List[float]
    val_curve: List[float]


@dataclass
class _FuserPass:
    gate: float
    fused: Image
    cache: dict = field(default_factory=dict)


def init_fuser_params(feature_channels: int, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    return {
        "conv.kernel": glorot_uniform(rng, (3, 3, 1, feature_channels), 9, 9 * feature_channels),
        "conv.bias": np.zeros(feature_channels),
        "gate.v": glorot_uniform(rng, (feature_channels,), feature_channels, 1),
        "gate.b": np.zeros(1),
    }


def _fuser_forward(params: Params, i1: Image, i2: Image) -> _FuserPass:
    x1, x2 = i1[..., None], i2[..., None]
    z1 = layers.conv2d_forward(x1, params["conv.kernel"], params["conv.bias"])
    z2 = layers.conv2d_forward(x2, params["conv.kernel"], params["conv.bias"])
    m1 = layers.relu_forward(z1).mean(axis=(0, 1))
    m2 = layers.relu_forward(z2).mean(axis=(0, 1))
    s = float(params["gate.v"] @ (m1 - m2) + params["gate.b"][0])
    a = float(layers.sigmoid(np.array(s)))
    fused = a * i1 + (1.0 - a) * i2
    return _FuserPass(a, fused, {"x1": x1, "x2": x2, "z1": z1, "z2": z2, "dm": m1 - m2})


def _fuser_backward(params: Params, run: _FuserPass, dgate: float) -> Params:
    a = run.gate
    ds = dgate * a * (1.0 - a)
    c = run.cache
    grads: Params = {"gate.v": ds * c["dm"], "gate.b": np.array([ds])}
    dkernel = np.zeros_like(params["conv.kernel"])
    dbias = np.zeros_like(params["conv.bias"])
    for sign, x, z in ((1.0, c["x1"], c["z1"]), (-1.0, c["x2"], c["z2"])):
        h, w = z.shape[:2]
        dm = sign * ds * params["gate.v"]
        dz = layers.relu_backward(z, np.broadcast_to(dm / (h * w), z.shape))
        _, dk, db = layers.conv2d_backward(x, params["conv.kernel"], dz)
        dkernel += dk
        dbias += db
    grads["conv.kernel"] = dkernel
    grads["conv.bias"] = dbias
    return grads


def apply_fuser(params: Params, i1: Image, i2: Image) -> Image:
    """Trained fusion; no information measure is computed at inference."""
    _check_same_shape(i1, i2)
    return _fuser_forward(params, to_gray(i1), to_gray(i2)).fused


def _pair_loss_and_grads(params: Params, i1: Image, i2: Image, c: float) -> Tuple[float, Params]:
    w = fusion_weights(information(i1), information(i2), c)
    run = _fuser_forward(params, i1, i2)
    loss = fusion_loss(run.fused, i1, i2, w)
    # loss = D * (w1 * (1 - a)^2 + w2 * a^2) with D = MSE(i1, i2)
    spread = float(np.mean((i1 - i2) ** 2))
    dgate = 2.0 * spread * (run.gate - w.w1)
    return loss, _fuser_backward(params, run, dgate)


def held_out_losses(params: Params, pairs: Sequence[Tuple[Image, Image]], c: float) -> Tuple[float, float]:
    """Mean (trained, analytic) fusion loss over pairs."""
    trained, analytic = [], []
    for i1, i2 in pairs:
        i1, i2 = to_gray(i1), to_gray(i2)
        w = fusion_weights(information(i1), information(i2), c)
        trained.append(fusion_loss(apply_fuser(params, i1, i2), i1, i2, w))
        analytic.append(fusion_loss(fuse_analytic(i1, i2, w), i1, i2, w))
    return float(np.mean(trained)), float(np.mean(analytic))


def train_fusion_net(pairs: Sequence[Tuple[Image, Image]], config: Optional[FuserTrainConfig] = None) -> FuserTrainResult:
    """
    Per-pair SGD on the weighted loss. Weights come from each pair's
    information measures during training only.
    """
    config = config or FuserTrainConfig()
    if not pairs:
        raise EmptyDatasetError("Fuser training needs at least one image pair")
    data = [(to_gray(np.asarray(a, dtype=np.float64)), to_gray(np.asarray(b, dtype=np.float64))) for a, b in pairs]
    for i1, i2 in data:
        _check_same_shape(i1, i2)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(data))
    n_val = int(len(data) * config.validation_fraction)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise EmptyDatasetError("No fuser training pairs left after the validation split")

    params = init_fuser_params(config.feature_channels, config.seed)
    loss_curve: List[float] = []
    val_curve: List[float] = []
    for epoch in range(1, config.epochs + 1):
        losses = []
        for index in rng.permutation(train_idx):
            i1, i2 = data[index]
            loss, grads = _pair_loss_and_grads(params, i1, i2, config.temperature)
            losses.append(loss)
            params = sgd_step(params, grads, config.learning_rate)
        loss_curve.append(float(np.mean(losses)))
        if n_val:
            val_curve.append(held_out_losses(params, [data[i] for i in val_idx], config.temperature)[0])
        logger.info(
            f"fuser epoch {epoch}/{config.epochs} loss={loss_curve[-1]:.6g}"
            + (f" val={val_curve[-1]:.6g}" if n_val else "")
        )
    return FuserTrainResult(params, loss_curve, val_curve)


def fuser_checkpoint(params: Params, config: FuserTrainConfig, metadata: Optional[dict] = None) -> Checkpoint:
    return Checkpoint(
        kind=FUSER_KIND,
        config={"feature_channels": config.feature_channels, "temperature": config.temperature},
        params=params,
        metadata=metadata or {},
    )
