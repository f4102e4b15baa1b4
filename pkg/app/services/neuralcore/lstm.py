"""LSTM and bidirectional LSTM with explicit backpropagation through time.

Gate layout inside the 4H pre-activation: input, forget, output, cell.
The bidirectional layer sums the two directions' outputs per timestep.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.core.error_handlers import ShapeMismatchError
from app.services.neuralcore.layers import sigmoid
from app.services.neuralcore.tensor import Params, Tensor, glorot_uniform


@dataclass
class _Step:
    x: Tensor
    h_prev: Tensor
    c_prev: Tensor
    i: Tensor
    f: Tensor
    o: Tensor
    g: Tensor
    tanh_c: Tensor


def init_lstm_params(rng: np.random.Generator, input_dim: int, hidden: int, prefix: str) -> Params:
    return {
        f"{prefix}.Wx": glorot_uniform(rng, (input_dim, 4 * hidden), input_dim, 4 * hidden),
        f"{prefix}.Wh": glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden),
        f"{prefix}.b": np.zeros(4 * hidden),
    }


def lstm_forward(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tuple[Tensor, List[_Step]]:
    """x: [N, T, D] -> hidden states [N, T, H]; zero initial state."""
    n, t_len, d = x.shape
    hidden = wh.shape[0]
    if wx.shape != (d, 4 * hidden):
        raise ShapeMismatchError("LSTM input weights do not match input width", details={"wx": list(wx.shape), "d": d})

    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    out = np.zeros((n, t_len, hidden))
    steps: List[_Step] = []
    for t in range(t_len):
        a = x[:, t] @ wx + h @ wh + b
        i = sigmoid(a[:, :hidden])
        f = sigmoid(a[:, hidden:2 * hidden])
        o = sigmoid(a[:, 2 * hidden:3 * hidden])
        g = np.tanh(a[:, 3 * hidden:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        steps.append(_Step(x[:, t], h, c, i, f, o, g, tanh_c))
        h = o * tanh_c
        c = c_new
        out[:, t] = h
    return out, steps


def lstm_backward(dh: Tensor, steps: List[_Step], wx: Tensor, wh: Tensor) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    """Returns (dx, dWx, dWh, db) for upstream gradients dh: [N, T, H]."""
    n, t_len, hidden = dh.shape
    dx = np.zeros((n, t_len, wx.shape[0]))
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hidden)
    dh_next = np.zeros((n, hidden))
    dc_next = np.zeros((n, hidden))

    for t in reversed(range(t_len)):
        s = steps[t]
        dht = dh[:, t] + dh_next
        do = dht * s.tanh_c
        dc = dht * s.o * (1.0 - s.tanh_c ** 2) + dc_next
        df = dc * s.c_prev
        di = dc * s.g
        dg = dc * s.i
        dc_next = dc * s.f
        da = np.concatenate(
            [
                di * s.i * (1.0 - s.i),
                df * s.f * (1.0 - s.f),
                do * s.o * (1.0 - s.o),
                dg * (1.0 - s.g ** 2),
            ],
            axis=1,
        )
        dx[:, t] = da @ wx.T
        dwx += s.x.T @ da
        dwh += s.h_prev.T @ da
        db += da.sum(axis=0)
        dh_next = da @ wh.T

    return dx, dwx, dwh, db


def init_bilstm_params(rng: np.random.Generator, input_dim: int, hidden: int, prefix: str = "lstm") -> Params:
    params = init_lstm_params(rng, input_dim, hidden, f"{prefix}.fw")
    params.update(init_lstm_params(rng, input_dim, hidden, f"{prefix}.bw"))
    return params


def bilstm_forward(x: Tensor, params: Params, prefix: str = "lstm") -> Tuple[Tensor, tuple]:
    """x: [N,] T, D -> [N,] T, H with forward and reversed-direction outputs summed."""
    batched = x.ndim == 3
    xb = x if batched else x[None]
    h_fw, steps_fw = lstm_forward(xb, params[f"{prefix}.fw.Wx"], params[f"{prefix}.fw.Wh"], params[f"{prefix}.fw.b"])
    h_bw, steps_bw = lstm_forward(
        xb[:, ::-1], params[f"{prefix}.bw.Wx"], params[f"{prefix}.bw.Wh"], params[f"{prefix}.bw.b"]
    )
    out = h_fw + h_bw[:, ::-1]
    cache = (steps_fw, steps_bw, batched)
    return (out if batched else out[0]), cache


def bilstm_backward(dout: Tensor, cache: tuple, params: Params, prefix: str = "lstm") -> Tuple[Tensor, Params]:
    steps_fw, steps_bw, batched = cache
    db_out = dout if batched else dout[None]
    dx_fw, dwx_fw, dwh_fw, db_fw = lstm_backward(db_out, steps_fw, params[f"{prefix}.fw.Wx"], params[f"{prefix}.fw.Wh"])
    dx_bw, dwx_bw, dwh_bw, db_bw = lstm_backward(
        db_out[:, ::-1], steps_bw, params[f"{prefix}.bw.Wx"], params[f"{prefix}.bw.Wh"]
    )
    dx = dx_fw + dx_bw[:, ::-1]
    grads = {
        f"{prefix}.fw.Wx": dwx_fw,
        f"{prefix}.fw.Wh": dwh_fw,
        f"{prefix}.fw.b": db_fw,
        f"{prefix}.bw.Wx": dwx_bw,
        f"{prefix}.bw.Wh": dwh_bw,
        f"{prefix}.bw.b": db_bw,
    }
    return (dx if batched else dx[0]), grads
