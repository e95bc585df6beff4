import struct

import numpy as np
import pytest

from vrsnet.tensorio import load_tensor, save_tensor, tensor_bytes, tensor_from_bytes


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.random((2, 3, 4, 5)).astype(np.float32)
    p = tmp_path / "t.pten"
    save_tensor(p, arr)
    back = load_tensor(p)
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)


def test_round_trip_is_byte_stable():
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    b1 = tensor_bytes(arr)
    b2 = tensor_bytes(tensor_from_bytes(b1))
    assert b1 == b2


def test_header_layout():
    arr = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    b = tensor_bytes(arr)
    assert b[:4] == b"PTEN"
    version, dtype, rank = struct.unpack_from("<HBB", b, 4)
    assert (version, dtype, rank) == (1, 0, 2)
    assert struct.unpack_from("<2I", b, 8) == (2, 2)
    # little-endian row-major payload
    assert np.frombuffer(b[16:], dtype="<f4").tolist() == [1.0, 2.0, 3.0, 4.0]


def test_bad_magic():
    with pytest.raises(ValueError, match="magic"):
        tensor_from_bytes(b"XXXX" + b"\0" * 16)


def test_truncated_payload():
    b = tensor_bytes(np.ones(10, dtype=np.float32))
    with pytest.raises(ValueError, match="truncated"):
        tensor_from_bytes(b[:-4])


def test_rank_limit_rejected():
    with pytest.raises(ValueError):
        tensor_bytes(np.zeros((1, 1, 1, 1, 1), dtype=np.float32))
