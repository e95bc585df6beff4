"""Binary tensor files (.pten).

Layout: magic "PTEN", u16 version=1, u8 dtype (0 = float32), u8 rank,
u32 dims[rank], then the payload as little-endian reals in C order
(row-major within a channel plane, planes concatenated per channel).
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"PTEN"
VERSION = 1
DTYPE_F32 = 0


def tensor_bytes(arr: np.ndarray) -> bytes:
    """Serialize a rank-<=4 float32 array."""
    a = np.ascontiguousarray(arr, dtype="<f4")
    if a.ndim < 1 or a.ndim > 4:
        raise ValueError(f"rank must be 1..4, got {a.ndim}")
    if any(d < 1 for d in a.shape):
        raise ValueError(f"all dims must be >= 1, got {a.shape}")
    head = MAGIC + struct.pack("<HBB", VERSION, DTYPE_F32, a.ndim)
    head += struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != MAGIC:
        raise ValueError("bad magic, not a .pten tensor")
    version, dtype, rank = struct.unpack_from("<HBB", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported .pten version {version}")
    if dtype != DTYPE_F32:
        raise ValueError(f"unsupported dtype tag {dtype}")
    if not 1 <= rank <= 4:
        raise ValueError(f"bad rank {rank}")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    off = 8 + 4 * rank
    n = int(np.prod(dims))
    payload = data[off : off + 4 * n]
    if len(payload) != 4 * n:
        raise ValueError("truncated .pten payload")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def save_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(tensor_bytes(arr))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read())
