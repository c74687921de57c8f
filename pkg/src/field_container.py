#!/usr/bin/env python3
"""
Binary container for sampled fields and CSV export of radial profiles.

Container layout (little-endian):
  magic(4) = b"FLD1" + dim(1, uint8) + n(4, uint32) + L(8, float64)
  + n**dim complex samples as interleaved (re, im) float64 pairs, row-major
"""

import logging
import struct
from typing import List, Tuple

import numpy as np

from field import Field, GridSpec
from params import InvalidParameterError
from records import write_bytes_atomic, write_csv_atomic

logger = logging.getLogger(__name__)

MAGIC = b"FLD1"
HEADER_FORMAT = "<4sBId"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
SAMPLE_DTYPE = np.dtype("<c16")


class FieldContainerError(Exception):
    """Raised for malformed or truncated field containers"""
    pass


def pack_field(u: Field) -> bytes:
    """
    Pack a field
    Format: header(17) + n**dim * 16 bytes
    """
    grid = u.grid
    header = struct.pack(HEADER_FORMAT, MAGIC, grid.dim, grid.n, grid.L)
    return header + np.ascontiguousarray(u.values, dtype=SAMPLE_DTYPE).tobytes(order="C")


def unpack_field(data: bytes) -> Field:
    if len(data) < HEADER_SIZE:
        raise FieldContainerError(f"Invalid container length: {len(data)}, expected at least {HEADER_SIZE} bytes")

    magic, dim, n, L = struct.unpack(HEADER_FORMAT, data[:HEADER_SIZE])
    if magic != MAGIC:
        raise FieldContainerError(f"Invalid container magic: {magic!r}")
    try:
        grid = GridSpec(dim, n, L)
    except InvalidParameterError as e:
        raise FieldContainerError(f"Invalid grid in container header: {e}") from e

    expected = HEADER_SIZE + grid.n ** grid.dim * SAMPLE_DTYPE.itemsize
    if len(data) != expected:
        raise FieldContainerError(f"Invalid container length: {len(data)}, expected {expected} bytes")

    samples = np.frombuffer(data, dtype=SAMPLE_DTYPE, offset=HEADER_SIZE).reshape(grid.shape)
    if not np.all(np.isfinite(samples)):
        raise FieldContainerError("Container holds non-finite samples")
    return Field(grid, samples)


def save_field(path: str, u: Field):
    write_bytes_atomic(path, pack_field(u))
    logger.debug(f"Field {u.grid!r} saved to {path}")


def load_field(path: str) -> Field:
    with open(path, "rb") as f:
        return unpack_field(f.read())


def radial_profile_rows(u: Field) -> List[Tuple[float, float, float]]:
    """(r, Re, Im) along the positive first axis starting at the origin"""
    grid = u.grid
    centre = grid.n // 2
    axis = grid.axis()
    index = [centre] * grid.dim
    rows = []
    for j in range(centre, grid.n):
        index[0] = j
        value = u.values[tuple(index)]
        rows.append((float(axis[j]), float(value.real), float(value.imag)))
    return rows


def write_radial_profile_csv(path: str, u: Field):
    write_csv_atomic(path, ("r", "re", "im"), radial_profile_rows(u))
