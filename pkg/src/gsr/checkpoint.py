"""Versioned binary container for named float32 parameter tensors."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"GSRCKPT\x01"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], fingerprint: str = "") -> None:
    """Write tensors as row-major little-endian float32 with a config fingerprint."""
    path = Path(path)
    fp = fingerprint.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<H", len(fp)))
        f.write(fp)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            nb = name.encode("utf-8")
            a = np.ascontiguousarray(arr, dtype="<f4")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], str]:
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: bad checkpoint magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (fplen,) = struct.unpack("<H", f.read(2))
        fingerprint = f.read(fplen).decode("utf-8")
        (count,) = struct.unpack("<I", f.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            payload = f.read(4 * n)
            if len(payload) != 4 * n:
                raise CheckpointError(f"{path}: truncated payload for tensor '{name}'")
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return tensors, fingerprint
