"""Self-describing checkpoints.

Layout (little-endian):
    "MNCK" | version u16 | metadata length u32 | metadata JSON
    | tensor count u32 | per tensor: name length u16, name, dtype u8, ndim u8, dims u32*ndim
    | packed row-major data in directory order | CRC-32 of everything before it (u32)
"""
import json
import math
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from core.errors import IntegrityError
from core.log import get_logger

logger = get_logger("CHECKPOINT")

MAGIC = b"MNCK"
VERSION = 1
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
CODE_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
PARAM_PREFIX = "param/"
VELOCITY_PREFIX = "velocity/"


@dataclass
class Checkpoint:
    params: Dict[str, np.ndarray]
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict = field(default_factory=dict)

    @property
    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params.values())


def encode_checkpoint(params: Dict[str, np.ndarray], velocity: Optional[Dict[str, np.ndarray]] = None,
                      metadata: Optional[Dict] = None) -> bytes:
    tensors = [(PARAM_PREFIX + k, v) for k, v in params.items()]
    tensors += [(VELOCITY_PREFIX + k, v) for k, v in (velocity or {}).items()]
    meta = json.dumps(metadata or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")

    parts = [MAGIC, struct.pack("<HI", VERSION, len(meta)), meta, struct.pack("<I", len(tensors))]
    for name, value in tensors:
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<BB", CODE_FOR_DTYPE[value.dtype], value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
    for _, value in tensors:
        parts.append(np.ascontiguousarray(value, dtype=DTYPE_CODES[CODE_FOR_DTYPE[value.dtype]]).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob, self.path, self.offset = blob, path, 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.blob):
            raise IntegrityError(f"truncated while reading {what}", offset=self.offset, path=self.path)
        chunk = self.blob[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(blob: bytes, path: str = "<memory>") -> Checkpoint:
    reader = _Reader(blob, path)
    if reader.take(4, "magic") != MAGIC:
        raise IntegrityError("not a checkpoint (bad magic)", offset=0, path=path)
    version, meta_len = reader.unpack("<HI", "header")
    if version != VERSION:
        raise IntegrityError(f"unsupported checkpoint version {version}", offset=4, path=path)
    meta_at = reader.offset
    try:
        metadata = json.loads(reader.take(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise IntegrityError(f"metadata is not valid JSON ({e})", offset=meta_at, path=path) from e
    (count,) = reader.unpack("<I", "tensor count")

    directory = []
    for index in range(count):
        (name_len,) = reader.unpack("<H", f"name length of tensor {index}")
        name_at = reader.offset
        try:
            name = reader.take(name_len, f"name of tensor {index}").decode("utf-8")
        except UnicodeDecodeError as e:
            raise IntegrityError(f"tensor {index} name is not UTF-8", offset=name_at, path=path) from e
        code, ndim = reader.unpack("<BB", f"dtype of {name}")
        if code not in DTYPE_CODES:
            raise IntegrityError(f"unknown dtype code {code} for {name}", offset=reader.offset - 2, path=path)
        dims_at = reader.offset
        dims = reader.unpack(f"<{ndim}I", f"dims of {name}")
        directory.append((name, DTYPE_CODES[code], dims, dims_at))

    tensors = {}
    for name, dtype, dims, dims_at in directory:
        size = math.prod(dims) * dtype.itemsize
        if size > len(blob) - reader.offset:
            raise IntegrityError(f"dims {dims} of {name} need {size} bytes, only {len(blob) - reader.offset} left",
                                 offset=dims_at, path=path)
        chunk = reader.take(size, f"data of {name}")
        tensors[name] = np.frombuffer(chunk, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))

    crc_at = reader.offset
    (stored,) = reader.unpack("<I", "checksum")
    if reader.offset != len(blob):
        raise IntegrityError(f"{len(blob) - reader.offset} trailing bytes after checksum",
                             offset=reader.offset, path=path)
    if zlib.crc32(blob[:crc_at]) != stored:
        raise IntegrityError("checksum mismatch", offset=crc_at, path=path)

    params = {k[len(PARAM_PREFIX):]: v for k, v in tensors.items() if k.startswith(PARAM_PREFIX)}
    velocity = {k[len(VELOCITY_PREFIX):]: v for k, v in tensors.items() if k.startswith(VELOCITY_PREFIX)}
    return Checkpoint(params, velocity, metadata)


def checkpoint_save(path, params: Dict[str, np.ndarray], velocity: Optional[Dict[str, np.ndarray]] = None,
                    metadata: Optional[Dict] = None) -> None:
    """Write-temp-then-rename, so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = encode_checkpoint(params, velocity, metadata)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(blob)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        raise OSError(f"could not write checkpoint {path}: {e}") from e
    logger.debug(f"Saved {len(params)} tensors to {path} ({len(blob):,} bytes)")


def checkpoint_load(path) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise OSError(f"could not read checkpoint {path}: {e}") from e
    checkpoint = decode_checkpoint(blob, str(path))
    logger.debug(f"Loaded {len(checkpoint.params)} tensors from {path}")
    return checkpoint
