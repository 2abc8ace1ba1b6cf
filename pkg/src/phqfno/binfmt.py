"""Versioned binary container shared by dataset shards and checkpoints.

Layout::

    magic      12 bytes  b"PHQFNO" + 6-byte kind tag (e.g. b"SHARD\\0")
    version    uint32 little-endian
    meta_len   uint64 little-endian
    meta       canonical JSON (sorted keys, compact), UTF-8
    arrays     raw little-endian float64 blobs, in the order of meta["arrays"]
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

VERSION = 1
_PREFIX = b"PHQFNO"


class FormatError(ValueError):
    pass


def _magic(kind: str) -> bytes:
    tag = kind.encode("ascii")
    if len(tag) > 6:
        raise ValueError(f"kind tag {kind!r} longer than 6 bytes")
    return _PREFIX + tag.ljust(6, b"\0")


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def write_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    header = dict(meta)
    specs = []
    blobs = []
    for name, arr in arrays.items():
        a = np.asarray(arr, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise FormatError(f"array {name!r} has non-finite values")
        specs.append({"name": name, "shape": list(a.shape)})
        blobs.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    header["arrays"] = specs
    body = canonical_json(header)
    with open(Path(path), "wb") as f:
        f.write(_magic(kind))
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(body)))
        f.write(body)
        for b in blobs:
            f.write(b)


def read_container(path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < 24:
        raise FormatError(f"{path}: truncated header")
    if data[:12] != _magic(kind):
        raise FormatError(f"{path}: bad magic {data[:12]!r}, expected {_magic(kind)!r}")
    (version,) = struct.unpack("<I", data[12:16])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    (n,) = struct.unpack("<Q", data[16:24])
    if 24 + n > len(data):
        raise FormatError(f"{path}: truncated metadata")
    try:
        meta = json.loads(data[24:24 + n])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata ({exc})") from None
    pos = 24 + n
    arrays = {}
    for spec in meta.pop("arrays", []):
        shape = tuple(spec["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(data):
            raise FormatError(f"{path}: truncated array {spec['name']!r}")
        a = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=pos).reshape(shape)
        if not np.all(np.isfinite(a)):
            raise FormatError(f"{path}: array {spec['name']!r} has non-finite values")
        arrays[spec["name"]] = a.astype(np.float64)
        pos += nbytes
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, arrays
