"""Binary portable pixmap (P6) and graymap (P5) reading and writing."""
from pathlib import Path
from typing import Tuple

import numpy as np

from core.errors import ParseError, ValidationError
from core.log import get_logger
from engine.tensor import DTYPES, Tensor
from engine.tensor_io import load_tensor, save_tensor

logger = get_logger("DATA")

MAXVAL = 255
BUILDING = 255
TENSOR_SUFFIX = ".mnt"


def _parse_header(blob: bytes, magic: bytes, path: str) -> Tuple[int, int, int]:
    """Returns (width, height, data offset); comments may appear between fields."""
    if blob[:2] != magic:
        raise ParseError(f"expected magic {magic.decode()}, got {blob[:2]!r}", offset=0, path=path)
    offset = 2
    values = []
    while len(values) < 3:
        start = offset
        while offset < len(blob) and (blob[offset:offset + 1].isspace() or blob[offset:offset + 1] == b"#"):
            if blob[offset:offset + 1] == b"#":
                end = blob.find(b"\n", offset)
                offset = len(blob) if end < 0 else end + 1
            else:
                offset += 1
        if offset == start:
            raise ParseError("header fields must be separated by whitespace", offset=offset, path=path)
        token_at = offset
        while offset < len(blob) and blob[offset:offset + 1].isdigit():
            offset += 1
        token = blob[token_at:offset]
        if not token:
            raise ParseError("expected a decimal header field", offset=token_at, path=path)
        values.append(int(token))
    if offset >= len(blob) or not blob[offset:offset + 1].isspace():
        raise ParseError("header must end with a single whitespace byte", offset=offset, path=path)
    width, height, maxval = values
    if maxval != MAXVAL:
        raise ParseError(f"only maxval {MAXVAL} is supported, got {maxval}", offset=token_at, path=path)
    if width < 1 or height < 1:
        raise ParseError(f"empty image {width}x{height}", offset=2, path=path)
    return width, height, offset + 1


def _pixels(blob: bytes, magic: bytes, channels: int, path: str) -> np.ndarray:
    width, height, start = _parse_header(blob, magic, path)
    need = width * height * channels
    if len(blob) - start < need:
        raise ParseError(f"expected {need} pixel bytes, found {len(blob) - start}",
                         offset=len(blob), path=path)
    data = np.frombuffer(blob, dtype=np.uint8, count=need, offset=start)
    return data.reshape(height, width, channels)


def decode_ppm(blob: bytes, path: str = "<memory>", dtype="float32") -> Tensor:
    """P6 bytes -> (1, 3, H, W) tensor scaled to [0, 1]."""
    pixels = _pixels(blob, b"P6", 3, path)
    image = pixels.transpose(2, 0, 1)[np.newaxis].astype(DTYPES[dtype]) / MAXVAL
    return Tensor(image)


def decode_pgm(blob: bytes, path: str = "<memory>") -> np.ndarray:
    """P5 mask bytes -> (H, W) uint8 category map (0 background, 1 building)."""
    pixels = _pixels(blob, b"P5", 1, path)[:, :, 0]
    bad = (pixels != 0) & (pixels != BUILDING)
    if np.any(bad):
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise ValidationError(f"{path}: mask value {pixels[row, col]} at pixel ({row}, {col}) "
                              f"is neither 0 nor {BUILDING}")
    return (pixels == BUILDING).astype(np.uint8)


def encode_ppm(image: Tensor) -> bytes:
    if image.shape[0] != 1 or image.shape[1] != 3:
        raise ValidationError(f"P6 output needs a (1, 3, H, W) tensor, got {image.shape}")
    _, _, height, width = image.shape
    pixels = np.clip(np.rint(image.data[0] * MAXVAL), 0, MAXVAL).astype(np.uint8)
    return f"P6\n{width} {height}\n{MAXVAL}\n".encode("ascii") + pixels.transpose(1, 2, 0).tobytes()


def encode_pgm(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValidationError(f"P5 output needs an (H, W) label map, got shape {labels.shape}")
    height, width = labels.shape
    pixels = np.where(labels > 0, BUILDING, 0).astype(np.uint8)
    return f"P5\n{width} {height}\n{MAXVAL}\n".encode("ascii") + pixels.tobytes()


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise OSError(f"could not read {path}: {e}") from e


def _write(path: Path, blob: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(blob)
    except OSError as e:
        raise OSError(f"could not write {path}: {e}") from e


def load_image(path, dtype="float32") -> Tensor:
    """Read a P6 image, or a raw tensor file when the suffix is `.mnt`."""
    path = Path(path)
    if path.suffix == TENSOR_SUFFIX:
        return load_tensor(path).astype(dtype)
    return decode_ppm(_read(path), str(path), dtype)


def save_image(path, image: Tensor) -> None:
    path = Path(path)
    if path.suffix == TENSOR_SUFFIX:
        save_tensor(path, image)
        return
    _write(path, encode_ppm(image))


def load_mask(path) -> np.ndarray:
    path = Path(path)
    return decode_pgm(_read(path), str(path))


def save_mask(path, labels: np.ndarray) -> None:
    """Write a category map as P5: 0 for background, 255 for building."""
    _write(Path(path), encode_pgm(labels))
