import struct
from pathlib import Path

import numpy as np
import pytest

from phqfno.binfmt import FormatError, read_container, write_container
from phqfno.pde.shard import DatasetShard, read_shard, write_shard

GOLDEN = Path(__file__).parent / "data" / "golden.shard"


def golden_shard():
    x = np.arange(8.0).reshape(2, 4) / 8 - 0.25
    return DatasetShard(x, -x * 1.5 + 1e-300, {"problem": "golden", "seed": 0})


def test_round_trip_bit_identical(tmp_path, rng):
    s = DatasetShard(rng.standard_normal((5, 8, 8)), rng.standard_normal((5, 8, 8)), {"a": [1, 2]})
    write_shard(tmp_path / "s.shard", s)
    back = read_shard(tmp_path / "s.shard")
    assert back.inputs.tobytes() == s.inputs.tobytes()
    assert back.targets.tobytes() == s.targets.tobytes()
    assert back.meta == s.meta


def test_golden_bytes(tmp_path):
    write_shard(tmp_path / "g.shard", golden_shard())
    assert (tmp_path / "g.shard").read_bytes() == GOLDEN.read_bytes()


def test_golden_layout():
    data = GOLDEN.read_bytes()
    assert data[:12] == b"PHQFNOSHARD\0"
    assert struct.unpack("<I", data[12:16]) == (1,)
    (n,) = struct.unpack("<Q", data[16:24])
    # first array value sits right after the metadata, little-endian
    assert struct.unpack("<d", data[24 + n:32 + n]) == (-0.25,)
    back = read_shard(GOLDEN)
    np.testing.assert_array_equal(back.inputs, golden_shard().inputs)


def test_truncated(tmp_path):
    data = GOLDEN.read_bytes()
    for cut in (10, 30, len(data) - 3):
        p = tmp_path / f"t{cut}.shard"
        p.write_bytes(data[:cut])
        with pytest.raises(FormatError, match="truncated"):
            read_shard(p)


def test_trailing_bytes(tmp_path):
    p = tmp_path / "x.shard"
    p.write_bytes(GOLDEN.read_bytes() + b"\0")
    with pytest.raises(FormatError, match="trailing"):
        read_shard(p)


def test_bad_magic_and_version(tmp_path):
    data = bytearray(GOLDEN.read_bytes())
    p = tmp_path / "m.shard"
    p.write_bytes(b"XX" + bytes(data[2:]))
    with pytest.raises(FormatError, match="magic"):
        read_shard(p)
    data[12:16] = struct.pack("<I", 2)
    p.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="version"):
        read_shard(p)
    with pytest.raises(FormatError, match="magic"):
        read_container(GOLDEN, "CKPT")


def test_non_finite_rejected(tmp_path):
    with pytest.raises(FormatError):
        write_container(tmp_path / "n.bin", "SHARD", {}, {"a": np.array([np.inf])})
    data = bytearray(GOLDEN.read_bytes())
    data[-8:] = struct.pack("<d", np.nan)
    p = tmp_path / "nan.shard"
    p.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="non-finite"):
        read_shard(p)


def test_shard_requires_aligned_arrays():
    with pytest.raises(ValueError):
        DatasetShard(np.zeros((2, 8)), np.zeros((3, 8)))
