"""
Parameter checkpoints.

Layout: one line of JSON (format version, kind, config echo, layer names
and shapes, metadata), then every array as raw little-endian float64 in
header order. The header is written with sorted keys so identical
parameters give byte-identical files.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from app.core.error_handlers import CheckpointError
from app.core.logger import get_logger
from app.services.neuralcore.tensor import Params

logger = get_logger(__name__)

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    kind: str
    config: Dict[str, Any]
    params: Params
    metadata: Dict[str, Any] = field(default_factory=dict)


def dumps_checkpoint(checkpoint: Checkpoint) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": checkpoint.kind,
        "config": checkpoint.config,
        "layers": [{"name": name, "shape": list(value.shape)} for name, value in checkpoint.params.items()],
        "metadata": checkpoint.metadata,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
    body = b"".join(np.ascontiguousarray(v, dtype=_DTYPE).tobytes() for v in checkpoint.params.values())
    return head + body


def _layers(header: Dict[str, Any]) -> List[Dict[str, Any]]:
    """Layer names and shapes from a parsed header."""
    try:
        layers = [
            {"name": str(layer["name"]), "shape": tuple(int(s) for s in layer["shape"])}
            for layer in header.get("layers", [])
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError("Malformed checkpoint header", details={"reason": repr(e)})
    if any(s < 0 for layer in layers for s in layer["shape"]):
        raise CheckpointError("Malformed checkpoint header", details={"reason": "negative layer dimension"})
    return layers


def loads_checkpoint(data: bytes, expected_kind: Optional[str] = None) -> Checkpoint:
    newline = data.find(b"\n")
    if newline < 0:
        raise CheckpointError("Checkpoint has no header line")
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError("Checkpoint header is not valid JSON", details={"reason": str(e)})
    if not isinstance(header, dict):
        raise CheckpointError("Malformed checkpoint header", details={"reason": "header is not a JSON object"})
    if not isinstance(header.get("kind"), str):
        raise CheckpointError("Malformed checkpoint header", details={"reason": "missing model kind"})

    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError("Unsupported checkpoint format", details={"format_version": header.get("format_version")})
    if expected_kind is not None and header.get("kind") != expected_kind:
        raise CheckpointError(
            "Checkpoint holds a different model",
            details={"kind": header.get("kind"), "expected": expected_kind},
        )

    body = memoryview(data)[newline + 1:]
    params: Params = {}
    offset = 0
    for layer in _layers(header):
        shape = layer["shape"]
        nbytes = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
        if offset + nbytes > len(body):
            raise CheckpointError("Checkpoint body is truncated", details={"layer": layer["name"]})
        params[layer["name"]] = np.frombuffer(body[offset:offset + nbytes], dtype=_DTYPE).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(body):
        raise CheckpointError("Checkpoint body has trailing bytes", details={"extra": len(body) - offset})

    return Checkpoint(header["kind"], header.get("config", {}), params, header.get("metadata", {}))


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(dumps_checkpoint(checkpoint))
    except OSError as e:
        raise CheckpointError(f"Could not write checkpoint {path}", details={"reason": str(e)})
    logger.info(f"Saved {checkpoint.kind} checkpoint to {path}")
    return path


def load_checkpoint(path: Path, expected_kind: Optional[str] = None) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Could not read checkpoint {path}", details={"reason": str(e)})
    return loads_checkpoint(data, expected_kind)
