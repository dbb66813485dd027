"""Binary checkpoint format.

Layout: magic ``OLHG`` | version u32 LE | tensor count u32 LE | per
tensor: name length u32 LE, UTF-8 name, rank u32 LE, one u64 LE per
dimension, float32 LE payload. Tensors are written sorted by name, so
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import IoError, ParseError

MAGIC = b"OLHG"
VERSION = 1


def save_checkpoint(path: str, tensors: dict[str, np.ndarray]):
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<I", len(tensors)))
            for name in sorted(tensors):
                arr = np.asarray(tensors[name], dtype="<f4")
                name_b = name.encode("utf-8")
                f.write(struct.pack("<I", len(name_b)))
                f.write(name_b)
                f.write(struct.pack("<I", arr.ndim))
                for d in arr.shape:
                    f.write(struct.pack("<Q", d))
                f.write(arr.tobytes(order="C"))
    except OSError as e:
        raise IoError(f"cannot write checkpoint {path}: {e}") from e


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoError(f"cannot read checkpoint {path}: {e}") from e
    if blob[:4] != MAGIC:
        raise ParseError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    off = 4
    version, count = struct.unpack_from("<II", blob, off)
    off += 8
    if version != VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}Q", blob, off) if rank else ()
        off += 8 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=size, offset=off).reshape(dims)
        off += 4 * size
        tensors[name] = arr.copy()
    if off != len(blob):
        raise ParseError(f"{path}: {len(blob) - off} trailing bytes")
    return tensors
