"""Standalone EMB1 writer/reader.

This mirrors the wire format of the analysis core byte for byte (magic
``EMB1``, dtype code, ndim, little-endian uint64 dims, raw row-major
data) without importing it; the binary layout is the interface between
the two packages and the cross-implementation round trip is part of the
test surface.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_array(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _CODES:
        raise ValueError(f"EMB1 stores float32/float64, got {arr.dtype}")
    if not 1 <= arr.ndim <= 4:
        raise ValueError(f"EMB1 supports 1..4 dims, got {arr.ndim}")
    payload = MAGIC + struct.pack("<BB", _CODES[arr.dtype], arr.ndim)
    payload += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload += arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    Path(path).write_bytes(payload)


def read_array(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    code, ndim = struct.unpack_from("<BB", raw, 4)
    shape = struct.unpack_from(f"<{ndim}Q", raw, 6)
    dtype = _DTYPES[code]
    offset = 6 + 8 * ndim
    count = int(np.prod(shape))
    if len(raw) != offset + count * dtype.itemsize:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape)


def write_sidecar(path, tokens: list[str], meta: dict[str, str]) -> None:
    payload = {"tokens": list(tokens), "meta": {str(k): str(v) for k, v in meta.items()}}
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")


def read_sidecar(path) -> tuple[list[str], dict[str, str]]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return list(obj["tokens"]), dict(obj.get("meta", {}))
