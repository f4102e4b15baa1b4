"""Single-row / two-row plate classifier trained with categorical cross-entropy."""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.error_handlers import EmptyDatasetError, UntrainedModelError
from app.core.logger import get_logger
from app.schemas.training import ClassifierTrainConfig
from app.services.imaging import Image, resize_bilinear, standardize
from app.services.neuralcore.checkpoint import Checkpoint
from app.services.neuralcore.layers import cross_entropy, cross_entropy_grad_logits, softmax
from app.services.neuralcore.layout_net import (
    LayoutNetConfig,
    init_layout_params,
    layout_backward,
    layout_logits,
)
from app.services.neuralcore.optim import sgd_step
from app.services.neuralcore.tensor import Params
from app.services.synthgen import Layout

logger = get_logger(__name__)

LAYOUT_KIND = "layout"
LAYOUT_ORDER = (Layout.SINGLE_ROW, Layout.TWO_ROW)


@dataclass
class LayoutClassifier:
    config: LayoutNetConfig
    params: Params
    trained: bool = False

    def prepare(self, crop: Image) -> Image:
        return standardize(resize_bilinear(crop, (self.config.input_width, self.config.input_height)))

    def predict_proba(self, crops: Sequence[Image]) -> np.ndarray:
        """[N, 2] probabilities ordered (single-row, two-row)."""
        if not self.trained:
            raise UntrainedModelError("Layout classifier has not been trained")
        batch = np.stack([self.prepare(c) for c in crops])
        logits, _ = layout_logits(batch, self.config, self.params)
        return softmax(logits)

    def to_checkpoint(self, metadata: Optional[dict] = None) -> Checkpoint:
        return Checkpoint(LAYOUT_KIND, self.config.model_dump(), self.params, {"trained": self.trained, **(metadata or {})})

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "LayoutClassifier":
        return cls(
            LayoutNetConfig(**checkpoint.config),
            checkpoint.params,
            bool(checkpoint.metadata.get("trained", False)),
        )


class ClassifierTrainResult(NamedTuple):
    classifier: LayoutClassifier
    loss_curve: List[float]
    val_curve: List[float]


def untrained_classifier(channels: Tuple[int, int] = (4, 8), seed: int = settings.SEED) -> LayoutClassifier:
    config = LayoutNetConfig(channels=channels)
    return LayoutClassifier(config, init_layout_params(config, seed), trained=False)


def classify_layout(crop: Image, classifier: LayoutClassifier) -> Tuple[Layout, float]:
    probs = classifier.predict_proba([crop])[0]
    index = int(probs.argmax())
    return LAYOUT_ORDER[index], float(probs[index])


def _one_hot(labels: Sequence[Layout]) -> np.ndarray:
    targets = np.zeros((len(labels), len(LAYOUT_ORDER)))
    for row, layout in enumerate(labels):
        targets[row, LAYOUT_ORDER.index(Layout(layout))] = 1.0
    return targets


def train_classifier(
    samples: Sequence[Tuple[Image, Layout]],
    config: Optional[ClassifierTrainConfig] = None,
) -> ClassifierTrainResult:
    """Mini-batch SGD on cross-entropy; deterministic for a given seed."""
    config = config or ClassifierTrainConfig()
    if not samples:
        raise EmptyDatasetError("Layout classifier needs at least one sample")

    net_config = LayoutNetConfig(channels=config.channels)
    model = LayoutClassifier(net_config, init_layout_params(net_config, config.seed), trained=True)
    inputs = np.stack([model.prepare(img) for img, _ in samples])
    targets = _one_hot([layout for _, layout in samples])

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(samples))
    n_val = int(len(samples) * config.validation_fraction)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise EmptyDatasetError("No classifier training samples left after the validation split")

    params = model.params
    loss_curve: List[float] = []
    val_curve: List[float] = []
    for epoch in range(1, config.epochs + 1):
        losses, weights = [], []
        shuffled = rng.permutation(train_idx)
        for start in range(0, len(shuffled), config.batch_size):
            batch = shuffled[start:start + config.batch_size]
            logits, cache = layout_logits(inputs[batch], net_config, params)
            probs = softmax(logits)
            losses.append(cross_entropy(targets[batch], probs))
            weights.append(len(batch))
            grads = layout_backward(cross_entropy_grad_logits(targets[batch], probs), cache, params)
            params = sgd_step(params, grads, config.learning_rate)
        loss_curve.append(float(np.average(losses, weights=weights)))
        if n_val:
            val_logits, _ = layout_logits(inputs[val_idx], net_config, params)
            val_curve.append(cross_entropy(targets[val_idx], softmax(val_logits)))
        logger.info(
            f"layout epoch {epoch}/{config.epochs} loss={loss_curve[-1]:.5f}"
            + (f" val={val_curve[-1]:.5f}" if n_val else "")
        )

    model.params = params
    return ClassifierTrainResult(model, loss_curve, val_curve)
