from typing import Optional

import numpy as np

from app.core.error_handlers import InvalidParameterError, NonFiniteGradientError
from app.services.neuralcore.tensor import Params


def global_norm(grads: Params) -> float:
    return float(np.sqrt(sum(float((g ** 2).sum()) for g in grads.values())))


def clip_gradients(grads: Params, max_norm: Optional[float]) -> Params:
    """Scale all gradients together so their global L2 norm is at most max_norm."""
    if max_norm is None:
        return grads
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}


def sgd_step(params: Params, grads: Params, lr: float) -> Params:
    """
    Plain SGD: w <- w - lr * g.

    Every gradient is checked before any weight moves, so a non-finite
    gradient leaves the parameters untouched.
    """
    if not lr > 0.0:
        raise InvalidParameterError("Learning rate must be positive", details={"lr": lr})
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradientError(f"Non-finite gradient for {name}", details={"param": name})
    return {name: value - lr * grads[name] if name in grads else value for name, value in params.items()}
