"""EMB1 tensor files and JSON token sidecars.

EMB1 is a minimal self-describing binary layout, fixed little-endian on
every host:

    bytes 0-3   magic ``EMB1``
    byte  4     dtype code: 0 = float32, 1 = float64
    byte  5     ndim (1..4)
    next 8*ndim little-endian uint64 dimension sizes
    rest        raw row-major element data

Token strings never enter the binary; they ride in a JSON sidecar
``{"tokens": [...], "meta": {...}}`` next to the tensor.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, SchemaError

MAGIC = b"EMB1"
MAX_NDIM = 4

_DTYPE_BY_CODE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_BY_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


@dataclass(frozen=True)
class TensorFile:
    """A shaped float array plus the dtype it is stored with on disk."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype not in _CODE_BY_KIND:
            raise FormatError(f"unsupported dtype {arr.dtype}; EMB1 stores float32 or float64")
        if not 1 <= arr.ndim <= MAX_NDIM:
            raise FormatError(f"EMB1 supports 1..{MAX_NDIM} dimensions, got {arr.ndim}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def as_float64(self) -> np.ndarray:
        """Widen to the canonical compute precision."""
        return np.asarray(self.data, dtype=np.float64)


def tensor_file(values, shape=None, dtype=np.float64) -> TensorFile:
    """Build a TensorFile from flat or shaped values, checking the element count."""
    arr = np.asarray(values, dtype=dtype)
    if shape is not None:
        expected = int(np.prod(shape))
        if arr.size != expected:
            raise FormatError(
                f"shape {tuple(shape)} implies {expected} elements, got {arr.size}"
            )
        arr = arr.reshape(shape)
    return TensorFile(arr)


def write_tensor(path, t: TensorFile) -> None:
    """Serialize ``t`` at ``path``; re-reading yields bit-identical values."""
    arr = t.data
    code = _CODE_BY_KIND[arr.dtype]
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    Path(path).write_bytes(header + le.tobytes(order="C"))


def read_tensor(path) -> TensorFile:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r} at offset 0 in {path}")
    if len(raw) < 6:
        raise FormatError(f"truncated header at offset {len(raw)} in {path}")
    code, ndim = struct.unpack_from("<BB", raw, 4)
    if code not in _DTYPE_BY_CODE:
        raise FormatError(f"unknown dtype code {code} at offset 4 in {path}")
    if not 1 <= ndim <= MAX_NDIM:
        raise FormatError(f"bad ndim {ndim} at offset 5 in {path}")
    dims_end = 6 + 8 * ndim
    if len(raw) < dims_end:
        raise FormatError(f"truncated dimension list at offset {len(raw)} in {path}")
    shape = struct.unpack_from(f"<{ndim}Q", raw, 6)
    dtype = _DTYPE_BY_CODE[code]
    count = int(np.prod(shape))
    expected = dims_end + count * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"payload size mismatch in {path}: expected {expected} bytes, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=dims_end)
    return TensorFile(data.reshape(shape))


@dataclass(frozen=True)
class TokenSidecar:
    tokens: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def check_length(self, token_axis_size: int) -> None:
        if len(self.tokens) != token_axis_size:
            raise SchemaError(
                f"sidecar has {len(self.tokens)} tokens, companion tensor axis is {token_axis_size}"
            )


def read_sidecar(path) -> TokenSidecar:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed sidecar JSON in {path}: {e}") from e
    if not isinstance(obj, dict) or "tokens" not in obj:
        raise SchemaError(f"sidecar {path} missing required field 'tokens'")
    tokens = obj["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(s, str) for s in tokens):
        raise SchemaError(f"sidecar {path}: 'tokens' must be an array of strings")
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError(f"sidecar {path}: 'meta' must be a string map")
    return TokenSidecar(tokens=tuple(tokens), meta={str(k): str(v) for k, v in meta.items()})


def write_sidecar(path, sc: TokenSidecar) -> None:
    payload = {"tokens": list(sc.tokens), "meta": dict(sc.meta)}
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
