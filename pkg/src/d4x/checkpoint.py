"""Binary checkpoint container for named float64 tensors.

Layout: magic "D4CK", format version (u32 LE), tensor count (u32 LE); then per
tensor: name length (u32 LE) + UTF-8 name, rank (u32 LE), dims (u64 LE each),
payload as little-endian float64, row-major.  Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import Tensor

MAGIC = b"D4CK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_tensors(path: str, tensors: dict) -> None:
    items = sorted(tensors.items())
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(items)))
        for name, t in items:
            arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
            # np.ascontiguousarray would promote 0-d arrays to 1-d
            arr = np.require(arr, dtype="<f8", requirements="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_tensors(path: str, requires_grad: bool = False) -> dict:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: bad magic, not a checkpoint")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", fh.read(4))
            name = fh.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}Q", fh.read(8 * rank))
            n = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(dims)
            out[name] = Tensor(data.astype(np.float64), requires_grad=requires_grad)
    return out
