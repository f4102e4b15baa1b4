"""
Layers with handwritten forward and backward passes.

Image tensors are NHWC. Every forward accepts an unbatched input (no
leading N) as well and returns the matching rank. Backward functions
recompute what they need from the forward inputs instead of keeping
hidden state.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.error_handlers import InvalidParameterError, ShapeMismatchError
from app.services.neuralcore.tensor import Tensor

CE_EPSILON = 1e-12


def _batched(x: Tensor, rank: int) -> Tuple[Tensor, bool]:
    if x.ndim == rank:
        return x, True
    if x.ndim == rank - 1:
        return x[None], False
    raise ShapeMismatchError(f"Expected a rank {rank - 1} or {rank} tensor", details={"shape": list(x.shape)})


# ---------------------------------------------------------------- convolution

def _check_conv(x: Tensor, kernels: Tensor) -> int:
    if kernels.ndim != 4 or kernels.shape[0] != kernels.shape[1] or kernels.shape[0] % 2 == 0:
        raise ShapeMismatchError("Kernels must be [k, k, Cin, Cout] with odd k", details={"shape": list(kernels.shape)})
    if x.shape[-1] != kernels.shape[2]:
        raise ShapeMismatchError(
            "Input channels do not match kernels",
            details={"input": list(x.shape), "kernels": list(kernels.shape)},
        )
    return kernels.shape[0] // 2


def _padded_windows(x: Tensor, k: int, pad: int) -> Tensor:
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    # windows[n, h, w, c, i, j] = xp[n, h + i, w + j, c]
    return sliding_window_view(xp, (k, k), axis=(1, 2))


def conv2d_forward(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Same-padded cross-correlation, stride 1. x: [N,]H,W,Cin -> [N,]H,W,Cout."""
    xb, batched = _batched(x, 4)
    pad = _check_conv(xb, kernels)
    windows = _padded_windows(xb, kernels.shape[0], pad)
    out = np.einsum("nhwcij,ijco->nhwo", windows, kernels, optimize=True) + bias
    return out if batched else out[0]


def conv2d_backward(x: Tensor, kernels: Tensor, dout: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    """Returns (dx, dkernels, dbias)."""
    xb, batched = _batched(x, 4)
    db_out, _ = _batched(dout, 4)
    pad = _check_conv(xb, kernels)
    k = kernels.shape[0]
    windows = _padded_windows(xb, k, pad)

    dkernels = np.einsum("nhwcij,nhwo->ijco", windows, db_out, optimize=True)
    dbias = db_out.sum(axis=(0, 1, 2))

    n, h, w, cin = xb.shape
    dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, cin))
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + h, j:j + w, :] += db_out @ kernels[i, j].T
    dx = dxp[:, pad:pad + h, pad:pad + w, :]
    return (dx if batched else dx[0]), dkernels, dbias


# ---------------------------------------------------------------- activations

def relu_forward(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def relu_backward(x: Tensor, dout: Tensor) -> Tensor:
    return dout * (x > 0.0)


def sigmoid(x: Tensor) -> Tensor:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(z: Tensor, axis: int = -1) -> Tensor:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z: Tensor, axis: int = -1) -> Tensor:
    shifted = z - z.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


# ---------------------------------------------------------------- pooling

def _pool_windows(x: Tensor, window: Tuple[int, int]) -> Tuple[Tensor, Tuple[int, ...]]:
    ph, pw = window
    if ph < 1 or pw < 1:
        raise InvalidParameterError("Pool window must be positive", details={"window": list(window)})
    n, h, w, c = x.shape
    ho, wo = -(-h // ph), -(-w // pw)
    padded = np.full((n, ho * ph, wo * pw, c), -np.inf)
    padded[:, :h, :w, :] = x
    win = padded.reshape(n, ho, ph, wo, pw, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, ph * pw)
    return win, (n, ho, wo, c)


def maxpool_forward(x: Tensor, window: Tuple[int, int]) -> Tensor:
    """Max over (height, width) windows; ragged edges are ceil-padded."""
    xb, batched = _batched(x, 4)
    win, _ = _pool_windows(xb, window)
    out = win.max(axis=-1)
    return out if batched else out[0]


def maxpool_backward(x: Tensor, window: Tuple[int, int], dout: Tensor) -> Tensor:
    """Routes each gradient to its window's argmax (first index on ties)."""
    xb, batched = _batched(x, 4)
    db_out, _ = _batched(dout, 4)
    ph, pw = window
    win, (n, ho, wo, c) = _pool_windows(xb, window)
    idx = win.argmax(axis=-1)[..., None]
    dwin = np.zeros_like(win)
    np.put_along_axis(dwin, idx, db_out[..., None], axis=-1)
    dpadded = dwin.reshape(n, ho, wo, c, ph, pw).transpose(0, 1, 4, 2, 5, 3).reshape(n, ho * ph, wo * pw, c)
    h, w = xb.shape[1:3]
    dx = dpadded[:, :h, :w, :]
    return dx if batched else dx[0]


# ---------------------------------------------------------------- reshaping

def mean_collapse_forward(x: Tensor, axis: int) -> Tensor:
    return x.mean(axis=axis)


def mean_collapse_backward(x_shape: Sequence[int], axis: int, dout: Tensor) -> Tensor:
    extent = x_shape[axis]
    return np.broadcast_to(np.expand_dims(dout, axis) / extent, tuple(x_shape)).copy()


# ---------------------------------------------------------------- dense

def dense_forward(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    if x.shape[-1] != weights.shape[0]:
        raise ShapeMismatchError(
            "Dense input width does not match weights",
            details={"input": list(x.shape), "weights": list(weights.shape)},
        )
    return x @ weights + bias


def dense_backward(x: Tensor, weights: Tensor, dout: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    flat_x = x.reshape(-1, x.shape[-1])
    flat_d = dout.reshape(-1, dout.shape[-1])
    return dout @ weights.T, flat_x.T @ flat_d, flat_d.sum(axis=0)


def dense_softmax(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    return softmax(dense_forward(x, weights, bias))


# ---------------------------------------------------------------- cross-entropy

@dataclass(frozen=True)
class LabelDistribution:
    """One-hot target and predicted distribution over C classes."""
    y_true: Tensor
    y_pred: Tensor

    def __post_init__(self) -> None:
        if self.y_true.shape != self.y_pred.shape or self.y_true.ndim != 1:
            raise ShapeMismatchError("y_true and y_pred must be vectors of equal length")
        if np.count_nonzero(self.y_true) != 1 or self.y_true.max() != 1.0:
            raise InvalidParameterError("y_true must be one-hot")
        if (self.y_pred < 0.0).any() or abs(self.y_pred.sum() - 1.0) > 1e-9:
            raise InvalidParameterError("y_pred must be a probability vector")


def cross_entropy(y_true: Tensor, y_pred: Tensor) -> float:
    """-(1/N) sum y_true * log y_pred over a [N, C] batch; y_pred clamped at 1e-12."""
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError("y_true and y_pred shapes differ")
    y_true = np.atleast_2d(y_true)
    y_pred = np.atleast_2d(y_pred)
    return float(-(y_true * np.log(np.maximum(y_pred, CE_EPSILON))).sum() / y_true.shape[0])


def cross_entropy_grad_logits(y_true: Tensor, y_pred: Tensor) -> Tensor:
    """Gradient of the batch-mean cross-entropy w.r.t. the softmax logits."""
    y_true = np.atleast_2d(y_true)
    y_pred = np.atleast_2d(y_pred)
    return (y_pred - y_true) / y_true.shape[0]


def ce_loss(batch: Sequence[LabelDistribution]) -> float:
    if not batch:
        raise InvalidParameterError("ce_loss needs at least one sample")
    return cross_entropy(
        np.stack([d.y_true for d in batch]),
        np.stack([d.y_pred for d in batch]),
    )
