"""Raw tensor files: little-endian `MNT1` header followed by row-major data."""
import struct
from pathlib import Path

import numpy as np

from core.errors import ParseError
from engine.tensor import Tensor

MAGIC = b"MNT1"
HEADER = struct.Struct("<4sB4I")
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
CODE_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def encode_tensor(tensor: Tensor) -> bytes:
    code = CODE_FOR_DTYPE[tensor.dtype]
    header = HEADER.pack(MAGIC, code, *tensor.shape)
    return header + tensor.data.astype(DTYPE_CODES[code], copy=False).tobytes(order="C")


def decode_tensor(blob: bytes, path=None) -> Tensor:
    if len(blob) < HEADER.size:
        raise ParseError(f"tensor header needs {HEADER.size} bytes, file has {len(blob)}",
                         offset=len(blob), path=path)
    magic, code, *dims = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0, path=path)
    if code not in DTYPE_CODES:
        raise ParseError(f"unknown dtype code {code}", offset=4, path=path)
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = len(blob) - HEADER.size
    if payload != expected:
        raise ParseError(f"payload is {payload} bytes, header promises {expected}",
                         offset=HEADER.size + min(payload, expected), path=path)
    data = np.frombuffer(blob, dtype=dtype, offset=HEADER.size).reshape(dims)
    return Tensor(data.astype(dtype.newbyteorder("="), copy=True))


def save_tensor(path, tensor: Tensor) -> None:
    Path(path).write_bytes(encode_tensor(tensor))


def load_tensor(path) -> Tensor:
    return decode_tensor(Path(path).read_bytes(), path=str(path))
