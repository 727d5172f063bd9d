"""The "L2D1" binary tensor format.

Layout: magic bytes ``L2D1``, u32 little-endian channel count, u32
little-endian frame count, then channels*frames float32 little-endian
values in row-major (channel-major, time-minor) order. Used for feature
files, checkpoint tensors, and test fixtures.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .exceptions import DimensionError, FormatError

MAGIC = b"L2D1"
_HEADER = struct.Struct("<4sII")


def write_tensor_stream(fh: BinaryIO, data: np.ndarray) -> None:
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise DimensionError(f"L2D1 stores 2-D tensors, got shape {data.shape}")
    channels, frames = arr.shape
    fh.write(_HEADER.pack(MAGIC, channels, frames))
    fh.write(arr.tobytes(order="C"))


def read_tensor_stream(fh: BinaryIO) -> np.ndarray:
    header = fh.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise FormatError("truncated L2D1 header")
    magic, channels, frames = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if channels == 0 or frames == 0:
        raise FormatError("L2D1 tensor must have positive channels and frames")
    payload = fh.read(4 * channels * frames)
    if len(payload) != 4 * channels * frames:
        raise FormatError("truncated L2D1 payload")
    flat = np.frombuffer(payload, dtype="<f4")
    return flat.reshape(channels, frames).copy()


def write_tensor(path, data: np.ndarray) -> None:
    """Write a channels x frames float32 tensor to ``path``."""
    with open(path, "wb") as fh:
        write_tensor_stream(fh, data)


def read_tensor(path) -> np.ndarray:
    """Read an L2D1 file back as a (channels, frames) float32 array."""
    with open(path, "rb") as fh:
        return read_tensor_stream(fh)
