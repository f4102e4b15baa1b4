"""Plate text recognition with the OCR network and CTC training."""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.error_handlers import EmptyDatasetError, InputTooSmallError, UntrainedModelError
from app.core.logger import get_logger
from app.schemas.training import OcrTrainConfig
from app.services.ctc import ProbMatrix, beam_decode, ctc_loss, ctc_loss_and_grad, is_feasible
from app.services.geometry import Box
from app.services.glyphs import NUM_CLASSES, decode_labels, encode_text
from app.services.imaging import Image, crop, resize_bilinear, standardize, to_gray
from app.services.neuralcore.checkpoint import Checkpoint
from app.services.neuralcore.layers import softmax
from app.services.neuralcore.ocr_net import OcrNetConfig, init_ocr_params, ocr_backward, ocr_logits
from app.services.neuralcore.optim import clip_gradients, sgd_step
from app.services.neuralcore.tensor import Params
from app.services.pipeline.alignment import CANONICAL_SIZE, AlignedPlate, align_plate
from app.services.synthgen import Layout, SceneRecord

logger = get_logger(__name__)

OCR_KIND = "ocr"
MIN_CROP_SIDE = 8
# Training crops are padded like localizer boxes, which land about a pixel outside the plate
TRAIN_CROP_PAD = 1.0


@dataclass
class OcrModel:
    config: OcrNetConfig
    params: Params
    trained: bool = False
    input_width: int = CANONICAL_SIZE[0]

    def prepare(self, row: Image) -> Image:
        return standardize(resize_bilinear(row, (self.input_width, self.config.input_height)))

    def probabilities(self, rows: Sequence[Image]) -> np.ndarray:
        if not self.trained:
            raise UntrainedModelError("OCR parameters have not been trained")
        logits, _ = ocr_logits(np.stack([self.prepare(r) for r in rows]), self.config, self.params)
        return softmax(logits)

    def to_checkpoint(self, metadata: Optional[dict] = None) -> Checkpoint:
        return Checkpoint(
            OCR_KIND,
            {**self.config.model_dump(), "input_width": self.input_width},
            self.params,
            {"trained": self.trained, **(metadata or {})},
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "OcrModel":
        config = dict(checkpoint.config)
        input_width = int(config.pop("input_width", CANONICAL_SIZE[0]))
        return cls(OcrNetConfig(**config), checkpoint.params, bool(checkpoint.metadata.get("trained", False)), input_width)


class Recognition(NamedTuple):
    text: str
    confidence: float


class OcrTrainResult(NamedTuple):
    model: OcrModel
    loss_curve: List[float]
    val_curve: List[float]
    skipped: int


def _decode_row(probs: np.ndarray, beam_width: int) -> Recognition:
    matrix = ProbMatrix(probs)
    labels = beam_decode(matrix, beam_width)
    confidence = float(np.clip(np.exp(-ctc_loss(matrix, labels)), 0.0, 1.0))
    return Recognition(decode_labels(labels.symbols), confidence)


def recognize(
    plate: Union[Image, AlignedPlate],
    model: OcrModel,
    beam_width: int = settings.BEAM_WIDTH,
) -> Recognition:
    """
    Read a plate. A bare crop is treated as single-row; two-row plates
    are read row by row, texts concatenated and confidences multiplied.
    """
    if isinstance(plate, AlignedPlate):
        rows = plate.rows
    else:
        if min(plate.shape[:2]) < MIN_CROP_SIDE:
            raise InputTooSmallError(
                f"Crop must be at least {MIN_CROP_SIDE}x{MIN_CROP_SIDE}",
                details={"shape": list(plate.shape)},
            )
        rows = [to_gray(plate)]

    probs = model.probabilities(rows)
    parts = [_decode_row(p, beam_width) for p in probs]
    return Recognition("".join(p.text for p in parts), float(np.prod([p.confidence for p in parts])))


# ---------------------------------------------------------------- training

def row_samples(record: SceneRecord) -> List[Tuple[Image, str]]:
    """(row image, row text) pairs cut from a record's ground-truth box."""
    box = record.gt_box
    h, w = record.frame.shape[:2]
    padded = Box(
        max(0.0, box.x_min - TRAIN_CROP_PAD),
        max(0.0, box.y_min - TRAIN_CROP_PAD),
        min(float(w), box.x_max + TRAIN_CROP_PAD),
        min(float(h), box.y_max + TRAIN_CROP_PAD),
    )
    plate_crop = crop(record.frame, *padded.as_list())
    layout = record.spec.layout if record.spec else Layout.SINGLE_ROW
    aligned = align_plate(plate_crop, layout)
    if aligned.layout is Layout.TWO_ROW:
        texts = record.spec.rows
    else:
        texts = [record.gt_text]
    return list(zip(aligned.rows, texts))


def _batch_loss_and_grads(
    inputs: np.ndarray,
    labels: Sequence[List[int]],
    config: OcrNetConfig,
    params: Params,
) -> Tuple[float, Params]:
    logits, cache = ocr_logits(inputs, config, params)
    probs = softmax(logits)
    n = len(labels)
    dlogits = np.zeros_like(logits)
    total = 0.0
    for i, y in enumerate(labels):
        loss, grad = ctc_loss_and_grad(probs[i], y)
        total += loss
        dlogits[i] = grad / n
    return total / n, ocr_backward(dlogits, cache, config, params)


def _mean_loss(inputs: np.ndarray, labels: Sequence[List[int]], config: OcrNetConfig, params: Params, chunk: int) -> float:
    losses = []
    for start in range(0, len(labels), chunk):
        logits, _ = ocr_logits(inputs[start:start + chunk], config, params)
        probs = softmax(logits)
        losses.extend(ctc_loss(p, y) for p, y in zip(probs, labels[start:start + chunk]))
    return float(np.mean(losses))


def train_ocr(
    samples: Sequence[Tuple[Image, str]],
    config: Optional[OcrTrainConfig] = None,
    input_height: int = settings.CANONICAL_PLATE_HEIGHT,
) -> OcrTrainResult:
    """
    Mini-batch SGD on CTC loss with global-norm gradient clipping.

    Samples whose label cannot fit in the network's time axis are skipped
    and counted.
    """
    config = config or OcrTrainConfig()
    net_config = OcrNetConfig(
        conv_channels=config.conv_channels,
        lstm_hidden=config.lstm_hidden,
        num_classes=NUM_CLASSES,
        input_height=input_height,
    )
    model = OcrModel(net_config, init_ocr_params(net_config, config.seed), trained=True)
    time_steps = net_config.time_steps(model.input_width)

    inputs, labels = [], []
    skipped = 0
    for image, text in samples:
        y = encode_text(text)
        if not is_feasible(time_steps, y):
            skipped += 1
            continue
        inputs.append(model.prepare(image))
        labels.append(y)
    if skipped:
        logger.warning(f"Skipped {skipped} samples with labels too long for {time_steps} timesteps")
    if not labels:
        raise EmptyDatasetError("No usable OCR training samples")

    x = np.stack(inputs)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(labels))
    n_val = int(len(labels) * config.validation_fraction)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise EmptyDatasetError("No OCR training samples left after the validation split")
    val_labels = [labels[i] for i in val_idx]

    params = model.params
    loss_curve: List[float] = []
    val_curve: List[float] = []
    for epoch in range(1, config.epochs + 1):
        losses, weights = [], []
        shuffled = rng.permutation(train_idx)
        for start in range(0, len(shuffled), config.batch_size):
            batch = shuffled[start:start + config.batch_size]
            loss, grads = _batch_loss_and_grads(x[batch], [labels[i] for i in batch], net_config, params)
            losses.append(loss)
            weights.append(len(batch))
            params = sgd_step(params, clip_gradients(grads, config.grad_clip), config.learning_rate)
        loss_curve.append(float(np.average(losses, weights=weights)))
        if n_val:
            val_curve.append(_mean_loss(x[val_idx], val_labels, net_config, params, config.batch_size))
        logger.info(
            f"ocr epoch {epoch}/{config.epochs} loss={loss_curve[-1]:.5f}"
            + (f" val={val_curve[-1]:.5f}" if n_val else "")
        )

    model.params = params
    return OcrTrainResult(model, loss_curve, val_curve, skipped)
