"""
Connectionist temporal classification.

Loss and gradient use the forward-backward recursion over the
blank-interleaved label, in log space. Blank is class 0. A brute-force
path enumerator serves as an independent check on small instances.
"""

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from app.core.error_handlers import (
    InfeasibleLabelError,
    InstanceTooLargeError,
    InvalidParameterError,
    ValidationError,
)
from app.core.logger import get_logger

logger = get_logger(__name__)

BLANK = 0
MAX_BRUTE_FORCE_PATHS = 1_000_000
_ROW_SUM_TOLERANCE = 1e-9


class ProbMatrix:
    """T x C per-timestep class distributions, blank at column 0."""

    __slots__ = ("values",)

    def __init__(self, values: npt.ArrayLike):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
            raise InvalidParameterError("ProbMatrix must be T x C with T >= 1 and C >= 2", details={"shape": list(arr.shape)})
        if not np.isfinite(arr).all() or (arr < 0.0).any():
            raise InvalidParameterError("ProbMatrix entries must be finite and non-negative")
        sums = arr.sum(axis=1)
        if np.abs(sums - 1.0).max() > _ROW_SUM_TOLERANCE:
            raise InvalidParameterError(
                "ProbMatrix rows must sum to 1",
                details={"max_deviation": float(np.abs(sums - 1.0).max())},
            )
        arr.setflags(write=False)
        self.values = arr

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def C(self) -> int:
        return self.values.shape[1]

    def __repr__(self) -> str:
        return f"ProbMatrix(T={self.T}, C={self.C})"


@dataclass(frozen=True)
class LabelSequence:
    symbols: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s < 1 for s in self.symbols):
            raise ValidationError("Label symbols must be non-blank class indices", details={"symbols": list(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[int]:
        return iter(self.symbols)

    def check_classes(self, num_classes: int) -> None:
        if any(s >= num_classes for s in self.symbols):
            raise ValidationError(
                "Label symbol outside the class range",
                details={"symbols": list(self.symbols), "num_classes": num_classes},
            )


Probs = Union[ProbMatrix, npt.ArrayLike]
Labels = Union[LabelSequence, Sequence[int]]


def _matrix(p: Probs) -> ProbMatrix:
    return p if isinstance(p, ProbMatrix) else ProbMatrix(p)


def _labels(y: Labels, num_classes: int) -> LabelSequence:
    seq = y if isinstance(y, LabelSequence) else LabelSequence(tuple(y))
    seq.check_classes(num_classes)
    return seq


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def min_timesteps(y: Labels) -> int:
    symbols = list(y)
    repeats = sum(1 for a, b in zip(symbols, symbols[1:]) if a == b)
    return len(symbols) + repeats


def is_feasible(T: int, y: Labels) -> bool:
    return T >= min_timesteps(y)


def _extended(symbols: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    ext = np.zeros(2 * len(symbols) + 1, dtype=np.int64)
    ext[1::2] = symbols
    skip = np.zeros(len(ext), dtype=bool)
    if len(ext) > 2:
        skip[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])
    return ext, skip


def _forward(log_p: np.ndarray, ext: np.ndarray, skip: np.ndarray) -> np.ndarray:
    T, S = log_p.shape[0], len(ext)
    alpha = np.full((T, S), -np.inf)
    alpha[0, 0] = log_p[0, ext[0]]
    if S > 1:
        alpha[0, 1] = log_p[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        a = prev.copy()
        a[1:] = np.logaddexp(a[1:], prev[:-1])
        a[2:] = np.where(skip[2:], np.logaddexp(a[2:], prev[:-2]), a[2:])
        alpha[t] = a + log_p[t, ext]
    return alpha


def _backward(log_p: np.ndarray, ext: np.ndarray, skip: np.ndarray) -> np.ndarray:
    T, S = log_p.shape[0], len(ext)
    beta = np.full((T, S), -np.inf)
    beta[T - 1, S - 1] = log_p[T - 1, ext[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = log_p[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        b = nxt.copy()
        b[:-1] = np.logaddexp(b[:-1], nxt[1:])
        b[:-2] = np.where(skip[2:], np.logaddexp(b[:-2], nxt[2:]), b[:-2])
        beta[t] = b + log_p[t, ext]
    return beta


def _log_likelihood(alpha: np.ndarray) -> float:
    last = alpha[-1]
    if len(last) == 1:
        return float(last[0])
    return float(np.logaddexp(last[-1], last[-2]))


def ctc_loss(p: Probs, y: Labels) -> float:
    """
    -log P(y | p). Returns math.inf when no alignment of length T collapses
    to y; check is_feasible() to tell that apart from a merely tiny P.
    """
    matrix = _matrix(p)
    labels = _labels(y, matrix.C)
    if not is_feasible(matrix.T, labels):
        return math.inf
    ext, skip = _extended(labels.symbols)
    log_likelihood = _log_likelihood(_forward(_log(matrix.values), ext, skip))
    return -log_likelihood if np.isfinite(log_likelihood) else math.inf


def ctc_loss_and_grad(p: Probs, y: Labels) -> Tuple[float, np.ndarray]:
    """Loss and its gradient w.r.t. the pre-softmax logits that produced p."""
    matrix = _matrix(p)
    labels = _labels(y, matrix.C)
    if not is_feasible(matrix.T, labels):
        raise InfeasibleLabelError(
            details={"timesteps": matrix.T, "required": min_timesteps(labels), "label_length": len(labels)}
        )
    probs = matrix.values
    log_p = _log(probs)
    ext, skip = _extended(labels.symbols)
    alpha = _forward(log_p, ext, skip)
    beta = _backward(log_p, ext, skip)
    log_likelihood = _log_likelihood(alpha)
    if not np.isfinite(log_likelihood):
        raise InfeasibleLabelError("Label has zero probability under the matrix", details={"label_length": len(labels)})

    with np.errstate(invalid="ignore"):
        log_gamma = alpha + beta - log_p[:, ext] - log_likelihood
    gamma = np.where(np.isfinite(log_gamma), np.exp(log_gamma), 0.0)
    posterior = np.zeros_like(probs)
    for s, k in enumerate(ext):
        posterior[:, k] += gamma[:, s]
    return -log_likelihood, probs - posterior


def ctc_grad(p: Probs, y: Labels) -> np.ndarray:
    return ctc_loss_and_grad(p, y)[1]


def _all_paths(T: int, C: int) -> np.ndarray:
    count = C ** T
    if count > MAX_BRUTE_FORCE_PATHS:
        raise InstanceTooLargeError(details={"paths": count, "limit": MAX_BRUTE_FORCE_PATHS})
    codes = np.arange(count)
    powers = C ** np.arange(T - 1, -1, -1)
    return (codes[:, None] // powers) % C


def _path_probabilities(values: np.ndarray, paths: np.ndarray) -> np.ndarray:
    return np.prod(values[np.arange(values.shape[0]), paths], axis=1)


def _emit_mask(paths: np.ndarray) -> np.ndarray:
    repeat = np.zeros_like(paths, dtype=bool)
    repeat[:, 1:] = paths[:, 1:] == paths[:, :-1]
    return (paths != BLANK) & ~repeat


def brute_force_ctc(p: Probs, y: Labels) -> float:
    """Sum over all C**T paths that collapse to y; -log of the total."""
    matrix = _matrix(p)
    labels = _labels(y, matrix.C)
    paths = _all_paths(matrix.T, matrix.C)
    probs = _path_probabilities(matrix.values, paths)
    mask = _emit_mask(paths)

    rows = mask.sum(axis=1) == len(labels)
    if len(labels) == 0:
        total = float(probs[rows].sum())
    else:
        emitted = paths[rows][mask[rows]].reshape(-1, len(labels))
        match = (emitted == np.asarray(labels.symbols)).all(axis=1)
        total = float(probs[rows][match].sum())
    return -math.log(total) if total > 0.0 else math.inf


def enumerate_label_probabilities(p: Probs) -> Dict[Tuple[int, ...], float]:
    """P(label | p) for every label reachable by some path."""
    matrix = _matrix(p)
    paths = _all_paths(matrix.T, matrix.C)
    probs = _path_probabilities(matrix.values, paths)
    mask = _emit_mask(paths)
    totals: Dict[Tuple[int, ...], float] = defaultdict(float)
    for path, keep, prob in zip(paths, mask, probs):
        totals[tuple(int(k) for k in path[keep])] += float(prob)
    return dict(totals)


def collapse(path: Sequence[int]) -> LabelSequence:
    out: List[int] = []
    prev = None
    for k in path:
        if k != prev and k != BLANK:
            out.append(int(k))
        prev = k
    return LabelSequence(tuple(out))


def greedy_decode(p: Probs) -> LabelSequence:
    matrix = _matrix(p)
    # argmax breaks ties toward the lowest index
    return collapse(matrix.values.argmax(axis=1).tolist())


def beam_decode(p: Probs, width: int) -> LabelSequence:
    """
    Prefix beam search; each prefix carries (log P ending in blank, log P ending in a label).

    Width 1 is best-path decoding.
    """
    if width < 1:
        raise InvalidParameterError("Beam width must be at least 1", details={"width": width})
    if width == 1:
        return greedy_decode(p)
    matrix = _matrix(p)
    log_p = _log(matrix.values)
    C = matrix.C

    beams: Dict[Tuple[int, ...], Tuple[float, float]] = {(): (0.0, -math.inf)}
    for t in range(matrix.T):
        row = log_p[t]
        nxt: Dict[Tuple[int, ...], List[float]] = defaultdict(lambda: [-math.inf, -math.inf])
        for prefix, (log_b, log_nb) in beams.items():
            log_total = np.logaddexp(log_b, log_nb)
            stay = nxt[prefix]
            stay[0] = np.logaddexp(stay[0], log_total + row[BLANK])
            last = prefix[-1] if prefix else None
            for k in range(1, C):
                if row[k] == -math.inf:
                    continue
                extended = nxt[prefix + (k,)]
                if k == last:
                    stay[1] = np.logaddexp(stay[1], log_nb + row[k])
                    extended[1] = np.logaddexp(extended[1], log_b + row[k])
                else:
                    extended[1] = np.logaddexp(extended[1], log_total + row[k])
        ranked = sorted(nxt.items(), key=lambda item: (-np.logaddexp(*item[1]), item[0]))
        beams = {prefix: (float(b), float(nb)) for prefix, (b, nb) in ranked[:width]}

    best = min(beams.items(), key=lambda item: (-np.logaddexp(*item[1]), item[0]))[0]
    return LabelSequence(best)


def dump_prob_matrix(p: Probs) -> str:
    matrix = _matrix(p)
    return json.dumps({"T": matrix.T, "C": matrix.C, "rows": matrix.values.tolist()})


def load_prob_matrix(text: str) -> ProbMatrix:
    try:
        payload = json.loads(text)
        matrix = ProbMatrix(payload["rows"])
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ValidationError("Malformed ProbMatrix dump", details={"reason": str(e)})
    if (matrix.T, matrix.C) != (payload.get("T"), payload.get("C")):
        raise ValidationError("ProbMatrix dump shape does not match its rows")
    return matrix
