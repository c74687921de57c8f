import csv
import struct

import numpy as np
import pytest

from field import Field, GridSpec, gaussian
from field_container import (HEADER_SIZE, MAGIC, FieldContainerError, load_field, pack_field, radial_profile_rows,
                             save_field, unpack_field, write_radial_profile_csv)


@pytest.fixture
def sample():
    grid = GridSpec(2, 16, 4.0)
    rng = np.random.default_rng(0)
    return Field(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))


def test_header_layout(sample):
    data = pack_field(sample)
    assert HEADER_SIZE == 17
    assert data[:4] == MAGIC
    assert len(data) == HEADER_SIZE + 16 * 16 * 16
    assert struct.unpack("<BId", data[4:HEADER_SIZE]) == (2, 16, 4.0)


def test_unpack_restores_samples_bit_for_bit(sample):
    restored = unpack_field(pack_field(sample))
    assert restored.grid == sample.grid
    assert np.array_equal(restored.values, sample.values)


def test_bad_magic(sample):
    data = b"XXXX" + pack_field(sample)[4:]
    with pytest.raises(FieldContainerError, match="magic"):
        unpack_field(data)


@pytest.mark.parametrize("cut", [3, HEADER_SIZE, -1])
def test_truncated_container(sample, cut):
    with pytest.raises(FieldContainerError, match="length"):
        unpack_field(pack_field(sample)[:cut])


def test_invalid_grid_in_header():
    data = struct.pack("<4sBId", MAGIC, 2, 15, 4.0) + bytes(15 * 15 * 16)
    with pytest.raises(FieldContainerError, match="grid"):
        unpack_field(data)


def test_non_finite_samples(sample):
    data = bytearray(pack_field(sample))
    data[HEADER_SIZE:HEADER_SIZE + 8] = struct.pack("<d", float("nan"))
    with pytest.raises(FieldContainerError, match="non-finite"):
        unpack_field(bytes(data))


def test_save_and_load(tmp_path, sample):
    path = tmp_path / "nested" / "u.fld"
    save_field(str(path), sample)
    assert np.array_equal(load_field(str(path)).values, sample.values)
    assert [p.name for p in path.parent.iterdir()] == ["u.fld"]


def test_radial_profile(tmp_path):
    grid = GridSpec(2, 32, 8.0)
    rows = radial_profile_rows(gaussian(grid))
    assert len(rows) == 16
    assert rows[0] == (0.0, 1.0, 0.0)
    assert rows[2][1] == pytest.approx(np.exp(-0.5 * 1.0 ** 2))

    path = tmp_path / "profile.csv"
    write_radial_profile_csv(str(path), gaussian(grid))
    with open(path, newline="") as f:
        table = list(csv.reader(f))
    assert table[0] == ["r", "re", "im"]
    assert len(table) == 17
    assert float(table[3][0]) == 1.0
