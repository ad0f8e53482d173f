"""
Parameter checkpoints.

Binary file: one length-prefixed record per array,
``<u32 id-length><id utf-8><u32 ndim><u64 dim>*ndim<f64 little-endian payload>``,
preceded by the magic ``NDCK`` and a u32 record count. A plain-text manifest
(``<path>.manifest``) lists ``id shape`` per line.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Union

import numpy as np

from omad.errors import CheckpointError

MAGIC = b"NDCK"
PathLike = Union[str, Path]


def manifest_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def save_checkpoint(path: PathLike, arrays: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = sorted(arrays)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(names)))
        for name in names:
            value = np.asarray(arrays[name], dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", value.ndim))
            f.write(struct.pack(f"<{value.ndim}Q", *value.shape))
            f.write(value.tobytes(order="C"))
    with open(manifest_path(path), "w") as f:
        for name in names:
            shape = "x".join(str(n) for n in np.shape(arrays[name])) or "scalar"
            f.write(f"{name} {shape}\n")
    return path


def _read(f, size: int, what: str) -> bytes:
    chunk = f.read(size)
    if len(chunk) != size:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return chunk


def load_checkpoint(path: PathLike) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    arrays: Dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        if _read(f, 4, "magic") != MAGIC:
            raise CheckpointError(f"{path} is not a parameter checkpoint")
        (count,) = struct.unpack("<I", _read(f, 4, "record count"))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read(f, 4, "id length"))
            name = _read(f, name_len, "id").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(f, 4, f"{name} rank"))
            shape = struct.unpack(f"<{ndim}Q", _read(f, 8 * ndim, f"{name} shape"))
            n = int(np.prod(shape)) if ndim else 1
            payload = _read(f, 8 * n, f"{name} payload")
            arrays[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        if f.read(1):
            raise CheckpointError(f"trailing bytes after {count} records in {path}")
    return arrays
