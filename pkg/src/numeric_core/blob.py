#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tensor Blob Format

A blob is one header line ``TENSOR v1 <rank> <extents...>`` followed by the
values as little-endian 64-bit floats in row-major order.
"""

import logging

import numpy as np

from src.errors import CheckpointError, VersionError
from src.numeric_core.tensor import Tensor

logger = logging.getLogger(__name__)

BLOB_MAGIC = "TENSOR"
BLOB_VERSION = "v1"


def encode_tensor(tensor: Tensor) -> bytes:
    """
    Encode a tensor as a blob

    Args:
        tensor: Tensor to encode

    Returns:
        Header and payload bytes
    """
    extents = "".join(f" {extent}" for extent in tensor.shape)
    header = f"{BLOB_MAGIC} {BLOB_VERSION} {tensor.ndim}{extents}\n".encode("ascii")
    return header + np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()


def decode_tensor(blob: bytes) -> Tensor:
    """
    Decode a blob into a constant tensor

    Args:
        blob: Bytes produced by ``encode_tensor``

    Returns:
        The decoded tensor
    """
    newline = blob.find(b"\n")
    if newline < 0:
        raise CheckpointError("tensor blob has no header line")
    fields = blob[:newline].decode("ascii", errors="replace").split()
    if len(fields) < 3 or fields[0] != BLOB_MAGIC:
        raise CheckpointError(f"malformed tensor blob header: {' '.join(fields)!r}")
    if fields[1] != BLOB_VERSION:
        raise VersionError(f"unsupported tensor blob version {fields[1]}")
    try:
        rank = int(fields[2])
        shape = tuple(int(extent) for extent in fields[3:])
    except ValueError:
        raise CheckpointError(f"malformed tensor blob header: {' '.join(fields)!r}") from None
    if len(shape) != rank or any(extent <= 0 for extent in shape):
        raise CheckpointError(f"tensor blob header declares rank {rank} with extents {shape}")

    payload = blob[newline + 1:]
    expected = int(np.prod(shape, dtype=np.int64)) * 8
    if len(payload) != expected:
        raise CheckpointError(f"tensor blob holds {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    return Tensor(data)
