"""Weights files (.pnet).

Layout: magic "PNET", u16 version=1, u16 layer count, u32 metadata length +
metadata (utf-8 "key=value" lines: transform parameters, bn eps/momentum,
tile size, schedules, training provenance), then one record per layer:
u8 kind tag, u32 shape header, float32 little-endian reals in declaration
order (conv: weights then bias; batch norm: gamma, beta, running mean,
running var; pool/sigmoid: none). A trailing u32 CRC32 covers everything
after the 8-byte prefix.

Kind tags: 1 conv (shape = out<<20 | in<<8 | groups), 2 batch norm
(shape = channels), 3 max pool (shape = factor), 4 sigmoid (shape = 0).
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .network import NetworkConfig, NetworkModel
from .nn.layers import BatchNormLayer, ConvLayer

MAGIC = b"PNET"
VERSION = 1
KIND_CONV = 1
KIND_BN = 2
KIND_POOL = 3
KIND_SIGMOID = 4


def _f32(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _meta_bytes(meta: dict) -> bytes:
    lines = [f"{k}={meta[k]}" for k in sorted(meta)]
    return "\n".join(lines).encode("utf-8")


def _parse_meta(data: bytes) -> dict:
    meta = {}
    for line in data.decode("utf-8").splitlines():
        if line:
            k, _, v = line.partition("=")
            meta[k] = v
    return meta


def save_model(model: NetworkModel) -> bytes:
    cfg = model.config
    meta = dict(model.meta)
    meta.update({
        "w": cfg.w, "in_channels": cfg.in_channels, "out_channels": cfg.out_channels,
        "latent_channels": cfg.latent_channels, "schedule_source": cfg.schedule_source,
        "pooling": ",".join(str(f) for f in cfg.pooling),
        "groups": ",".join(str(g) for g in cfg.groups),
        "bn_eps": repr(cfg.bn_eps), "bn_momentum": repr(cfg.bn_momentum),
    })
    records = []
    for i in range(4):
        records.append(_conv_record(model.convs[i]))
        records.append(_bn_record(model.bns[i]))
        records.append(_pool_record(cfg.pooling[i]))
    records.append(_conv_record(model.convs[4]))
    records.append(_pool_record(cfg.pooling[4]))
    records.append(struct.pack("<BI", KIND_SIGMOID, 0))
    mb = _meta_bytes(meta)
    payload = struct.pack("<I", len(mb)) + mb + b"".join(records)
    head = MAGIC + struct.pack("<HH", VERSION, len(records))
    return head + payload + struct.pack("<I", zlib.crc32(payload))


def _conv_record(c: ConvLayer) -> bytes:
    shape = (c.out_channels << 20) | (c.in_channels << 8) | c.groups
    return struct.pack("<BI", KIND_CONV, shape) + _f32(c.weights) + _f32(c.bias)


def _bn_record(b: BatchNormLayer) -> bytes:
    return (struct.pack("<BI", KIND_BN, b.channels) + _f32(b.gamma) + _f32(b.beta)
            + _f32(b.running_mean) + _f32(b.running_var))


def _pool_record(factor: int) -> bytes:
    return struct.pack("<BI", KIND_POOL, factor)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise ValueError("truncated weights payload")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def f32(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").copy()


def load_model(data: bytes) -> NetworkModel:
    if data[:4] != MAGIC:
        raise ValueError("bad magic, not a weights file")
    version, nrec = struct.unpack_from("<HH", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported weights version {version}")
    payload = data[8:-4]
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(payload) != crc:
        raise ValueError("weights CRC mismatch")
    r = _Reader(payload)
    (meta_len,) = struct.unpack("<I", r.take(4))
    meta = _parse_meta(r.take(meta_len))
    convs, bns, pools = [], [], []
    for _ in range(nrec):
        kind, shape = struct.unpack("<BI", r.take(5))
        if kind == KIND_CONV:
            cout, cin, groups = shape >> 20, (shape >> 8) & 0xFFF, shape & 0xFF
            w = r.f32(cout * (cin // groups) * 9).reshape(cout, cin // groups, 3, 3)
            convs.append(ConvLayer(w, r.f32(cout), groups))
        elif kind == KIND_BN:
            g, b, rm, rv = (r.f32(shape) for _ in range(4))
            bns.append(BatchNormLayer(g, b, rm, rv,
                                      float(meta["bn_eps"]), float(meta["bn_momentum"])))
        elif kind == KIND_POOL:
            pools.append(shape)
        elif kind == KIND_SIGMOID:
            pass
        else:
            raise ValueError(f"unknown layer kind {kind}")
    if r.off != len(payload):
        raise ValueError("trailing bytes in weights payload")
    cfg = NetworkConfig(
        w=int(meta["w"]), in_channels=int(meta["in_channels"]),
        out_channels=int(meta["out_channels"]),
        latent_channels=int(meta["latent_channels"]),
        schedule_source=meta["schedule_source"],
        pooling=tuple(int(f) for f in meta["pooling"].split(",")),
        groups=tuple(int(g) for g in meta["groups"].split(",")),
        bn_eps=float(meta["bn_eps"]), bn_momentum=float(meta["bn_momentum"]))
    if tuple(pools) != cfg.pooling:
        raise ValueError("pool records disagree with the recorded schedule")
    return NetworkModel(cfg, convs, bns, meta)


def save_model_file(model: NetworkModel, path) -> None:
    with open(path, "wb") as f:
        f.write(save_model(model))


def load_model_file(path) -> NetworkModel:
    with open(path, "rb") as f:
        return load_model(f.read())
