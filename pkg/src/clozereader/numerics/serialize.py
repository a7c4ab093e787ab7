"""Binary tensor blocks for checkpoints.

Block layout, all integers little-endian:

    magic  4 bytes  b"CLZT"
    u16    format version (currently 1)
    u8     dtype code (1 = float64, 2 = float32, 3 = int64)
    u8     rank
    u64*r  dimensions
    data   values, little-endian, C order

Round-trips are bitwise exact, including empty and zero-rank tensors.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .. import ClozereaderError

TENSOR_MAGIC = b"CLZT"
TENSOR_VERSION = 1

_DTYPE_CODES = {
    np.dtype("float64"): 1,
    np.dtype("float32"): 2,
    np.dtype("int64"): 3,
}
_CODE_DTYPES = {
    1: np.dtype("<f8"),
    2: np.dtype("<f4"),
    3: np.dtype("<i8"),
}


class TensorFormatError(ClozereaderError):
    """Corrupted or incompatible tensor block."""


def write_tensor(fh: BinaryIO, array: np.ndarray) -> None:
    dtype = np.dtype(array.dtype)
    code = _DTYPE_CODES.get(dtype)
    if code is None:
        raise TensorFormatError(f"unsupported dtype {dtype}")
    header = struct.pack(
        f"<4sHBB{array.ndim}Q",
        TENSOR_MAGIC,
        TENSOR_VERSION,
        code,
        array.ndim,
        *array.shape,
    )
    fh.write(header)
    fh.write(np.ascontiguousarray(array).astype(dtype.newbyteorder("<")).tobytes())


def read_tensor(fh: BinaryIO) -> np.ndarray:
    head = fh.read(8)
    if len(head) != 8:
        raise TensorFormatError("truncated tensor header")
    magic, version, code, rank = struct.unpack("<4sHBB", head)
    if magic != TENSOR_MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    if version != TENSOR_VERSION:
        raise TensorFormatError(
            f"tensor format version {version} not supported (expected {TENSOR_VERSION})"
        )
    dtype = _CODE_DTYPES.get(code)
    if dtype is None:
        raise TensorFormatError(f"unknown dtype code {code}")
    raw_shape = fh.read(8 * rank)
    if len(raw_shape) != 8 * rank:
        raise TensorFormatError("truncated tensor shape")
    shape = struct.unpack(f"<{rank}Q", raw_shape) if rank else ()
    count = 1
    for dim in shape:
        count *= dim
    payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise TensorFormatError("truncated tensor payload")
    array = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return array.astype(dtype.newbyteorder("="), copy=True)
