"""Tests for Tensor and the raw tensor file format."""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import struct

import numpy as np
import pytest

from core.errors import DimensionError, ParseError
from engine.tensor import Tensor
from engine.tensor_io import HEADER, decode_tensor, encode_tensor, load_tensor, save_tensor


def test_tensor_requires_four_axes():
    """Test that non 4-D data is rejected."""
    with pytest.raises(DimensionError):
        Tensor(np.zeros((3, 3)))


def test_tensor_keeps_precision():
    """Test float32 stays float32 and integers widen to float64."""
    assert Tensor(np.zeros((1, 1, 2, 2), dtype=np.float32)).dtype == np.float32
    assert Tensor(np.zeros((1, 1, 2, 2), dtype=np.int32)).dtype == np.float64
    assert Tensor.zeros((1, 2, 3, 4), "float32").shape == (1, 2, 3, 4)


def test_raw_file_header_layout():
    """Test the MNT1 header: magic, dtype code, four little-endian u32 dims."""
    blob = encode_tensor(Tensor(np.zeros((1, 2, 3, 4), dtype=np.float32)))
    magic, code, *dims = struct.unpack_from("<4sB4I", blob)
    assert magic == b"MNT1"
    assert code == 0
    assert dims == [1, 2, 3, 4]
    assert len(blob) == HEADER.size + 24 * 4


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_raw_file_roundtrip(tmp_path, dtype):
    """Test that save then load is bitwise lossless."""
    data = np.random.default_rng(0).normal(size=(2, 3, 4, 5)).astype(dtype)
    path = tmp_path / "t.mnt"
    save_tensor(path, Tensor(data))
    loaded = load_tensor(path)
    assert loaded.dtype == dtype
    assert loaded.data.tobytes() == data.tobytes()


def test_raw_file_truncated_reports_offset():
    """Test that a short payload is a parse error with a byte offset."""
    blob = encode_tensor(Tensor(np.ones((1, 1, 2, 2))))
    with pytest.raises(ParseError) as info:
        decode_tensor(blob[:-3])
    assert info.value.offset is not None


def test_raw_file_bad_magic():
    """Test that a wrong magic is rejected at offset 0."""
    blob = b"XXXX" + encode_tensor(Tensor(np.ones((1, 1, 1, 1))))[4:]
    with pytest.raises(ParseError) as info:
        decode_tensor(blob)
    assert info.value.offset == 0
