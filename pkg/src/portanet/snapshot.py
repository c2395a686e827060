"""Binary tensor files: learnable-parameter snapshots and the CIFAR mean image.

Layout (all integers little-endian u32)::

    b"PNSN" | version=1 | blob count
    per blob: rank | extents... | float32 LE payload
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"PNSN"
VERSION = 1
_U32 = struct.Struct("<I")
_LE_F32 = np.dtype("<f4")

PathLike = Union[str, Path]


def encode(arrays: Sequence[np.ndarray]) -> bytes:
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(arrays))]
    for a in arrays:
        a = np.asarray(a)
        parts.append(_U32.pack(a.ndim))
        parts.extend(_U32.pack(d) for d in a.shape)
        parts.append(np.ascontiguousarray(a, dtype=_LE_F32).tobytes())
    return b"".join(parts)


def decode(buf: bytes) -> list[np.ndarray]:
    pos = 0

    def u32() -> int:
        nonlocal pos
        if pos + 4 > len(buf):
            raise FormatError("snapshot truncated inside a header")
        (v,) = _U32.unpack_from(buf, pos)
        pos += 4
        return v

    if buf[:4] != MAGIC:
        raise FormatError("not a snapshot file (bad magic)")
    pos = 4
    version = u32()
    if version != VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    out = []
    for _ in range(u32()):
        rank = u32()
        if not 1 <= rank <= 4:
            raise FormatError(f"corrupt blob header (rank {rank})")
        shape = tuple(u32() for _ in range(rank))
        nbytes = int(np.prod(shape)) * 4
        if pos + nbytes > len(buf):
            raise FormatError("snapshot truncated inside a payload")
        a = np.frombuffer(buf, dtype=_LE_F32, count=nbytes // 4, offset=pos)
        out.append(a.astype(np.float32).reshape(shape))
        pos += nbytes
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after the last blob")
    return out


def write_tensors(path: PathLike, arrays: Sequence[np.ndarray]) -> None:
    Path(path).write_bytes(encode(arrays))


def read_tensors(path: PathLike) -> list[np.ndarray]:
    return decode(Path(path).read_bytes())


def snapshot_save(net, path: PathLike) -> None:
    write_tensors(path, [b.data.array for b in net.learnables])


def snapshot_load(net, path: PathLike) -> None:
    arrays = read_tensors(path)
    blobs = net.learnables
    if len(arrays) != len(blobs):
        raise ShapeError(f"snapshot holds {len(arrays)} blobs, net has {len(blobs)}")
    for blob, a in zip(blobs, arrays):
        if blob.shape != a.shape:
            raise ShapeError(f"snapshot blob shape {a.shape} does not match {blob.name} {blob.shape}")
    for blob, a in zip(blobs, arrays):
        np.copyto(blob.data.array, a)
