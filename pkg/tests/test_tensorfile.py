import struct

import numpy as np
import pytest

from dancegen import tensorfile
from dancegen.exceptions import DimensionError, FormatError


def test_round_trip(tmp_path):
    data = np.random.default_rng(0).normal(size=(7, 13)).astype(np.float32)
    path = tmp_path / "t.l2d"
    tensorfile.write_tensor(path, data)
    back = tensorfile.read_tensor(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, data)


def test_header_layout(tmp_path):
    path = tmp_path / "t.l2d"
    tensorfile.write_tensor(path, np.arange(6, dtype=np.float32).reshape(2, 3))
    raw = path.read_bytes()
    assert raw[:4] == b"L2D1"
    channels, frames = struct.unpack("<II", raw[4:12])
    assert (channels, frames) == (2, 3)
    assert len(raw) == 12 + 4 * 6
    assert struct.unpack("<f", raw[12:16])[0] == 0.0
    assert struct.unpack("<f", raw[-4:])[0] == 5.0  # row-major: last value is [1, 2]


def test_float64_input_written_as_f32(tmp_path):
    path = tmp_path / "t.l2d"
    tensorfile.write_tensor(path, np.full((1, 2), 1 / 3, dtype=np.float64))
    assert np.allclose(tensorfile.read_tensor(path), np.float32(1 / 3))


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.l2d"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError):
        tensorfile.read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.l2d"
    tensorfile.write_tensor(path, np.ones((2, 2), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError):
        tensorfile.read_tensor(path)


def test_rejects_non_2d(tmp_path):
    with pytest.raises(DimensionError):
        tensorfile.write_tensor(tmp_path / "t.l2d", np.zeros(4, dtype=np.float32))
