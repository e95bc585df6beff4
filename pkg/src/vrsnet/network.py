"""The 5-layer tile-error predictor.

Layer pattern (channels for the recommended config, tile size w=16):
in->16, 16->16 (g1), 16->16 (g4), 16->16 (g8), 16->out (g1); batch norm +
ReLU after layers 1-4; max pooling per the pooling schedule; final sigmoid.
The product of the pooling factors equals w, so a (N, C, H, W) input yields
an (N, out, H/w, W/w) prediction grid — one value per w x w tile per rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .nn import kernels, layers
from .nn.layers import BatchNormLayer, ConvLayer

SUPPORTED_W = (1, 2, 4, 8, 16, 32)
GROUP_SCHEDULE = (1, 1, 4, 8, 1)


def pooling_schedule(w: int, source: str = "eq1") -> tuple:
    """Per-layer down-pooling factors; their product is always w.

    source='eq1' pools as early as possible: factor 2 while the remaining
    reduction exceeds 2, then the exact remainder. source='table3' is the
    published profile for w=16 ([1,2,2,2,2]) and falls back to eq1 otherwise.
    """
    if w not in SUPPORTED_W:
        raise ValueError(f"unsupported tile size {w}, expected one of {SUPPORTED_W}")
    if source not in ("eq1", "table3"):
        raise ValueError(f"unknown schedule source {source!r}")
    if source == "table3":
        if w == 16:
            return (1, 2, 2, 2, 2)
        source = "eq1"
    sched = tuple(2 if (w / 2 ** i > 2 and i < 5) else math.ceil(w / 2 ** i)
                  for i in range(5))
    assert int(np.prod(sched)) == w
    return sched


@dataclass
class NetworkConfig:
    w: int = 16
    in_channels: int = 4
    out_channels: int = 4
    latent_channels: int = 16
    schedule_source: str = "eq1"
    pooling: tuple = ()
    groups: tuple = GROUP_SCHEDULE
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if not self.pooling:
            self.pooling = pooling_schedule(self.w, self.schedule_source)
        if len(self.pooling) != 5 or len(self.groups) != 5:
            raise ValueError("pooling and group schedules must have 5 entries")
        if int(np.prod(self.pooling)) != self.w:
            raise ValueError(f"pooling product {self.pooling} != w={self.w}")
        for g, (ci, co) in zip(self.groups, self.channel_pairs()):
            if ci % g or co % g:
                raise ValueError(f"groups={g} does not divide {ci}->{co}")

    def channel_pairs(self):
        lat = self.latent_channels
        return [(self.in_channels, lat), (lat, lat), (lat, lat), (lat, lat),
                (lat, self.out_channels)]


@dataclass
class NetworkModel:
    config: NetworkConfig
    convs: list          # 5 ConvLayer
    bns: list            # 4 BatchNormLayer (after layers 1-4)
    meta: dict = field(default_factory=dict)

    def parameters(self) -> dict:
        """Trainable parameters by name (arrays shared, not copied)."""
        p = {}
        for i, c in enumerate(self.convs):
            p[f"conv{i + 1}.weight"] = c.weights
            p[f"conv{i + 1}.bias"] = c.bias
        for i, b in enumerate(self.bns):
            p[f"bn{i + 1}.gamma"] = b.gamma
            p[f"bn{i + 1}.beta"] = b.beta
        return p

    def param_count(self, include_running_stats: bool = True) -> int:
        n = sum(v.size for v in self.parameters().values())
        if include_running_stats:
            n += sum(b.running_mean.size + b.running_var.size for b in self.bns)
        return n

    def astype(self, dtype) -> "NetworkModel":
        convs = [ConvLayer(c.weights.astype(dtype), c.bias.astype(dtype), c.groups)
                 for c in self.convs]
        bns = [BatchNormLayer(b.gamma.astype(dtype), b.beta.astype(dtype),
                              b.running_mean.astype(dtype), b.running_var.astype(dtype),
                              b.eps, b.momentum) for b in self.bns]
        return NetworkModel(self.config, convs, bns, dict(self.meta))


def build_network(config: NetworkConfig, seed: int = 0, dtype=np.float32) -> NetworkModel:
    rng = np.random.default_rng(seed)
    convs = [layers.make_conv(ci, co, g, rng, dtype)
             for (ci, co), g in zip(config.channel_pairs(), config.groups)]
    bns = [layers.make_batchnorm(config.latent_channels, config.bn_eps,
                                 config.bn_momentum, dtype) for _ in range(4)]
    return NetworkModel(config, convs, bns)


def _bn_prepare(bn: BatchNormLayer, z: np.ndarray, train: bool):
    if train:
        mean, var = kernels.bn_stats(z)
        mom = bn.momentum
        bn.running_mean[:] = ((1 - mom) * bn.running_mean + mom * mean).astype(
            bn.running_mean.dtype)
        bn.running_var[:] = ((1 - mom) * bn.running_var + mom * var).astype(
            bn.running_var.dtype)
    else:
        mean = bn.running_mean.astype(np.float64)
        var = bn.running_var.astype(np.float64)
    return mean, 1.0 / np.sqrt(var + bn.eps)


def forward(model: NetworkModel, x: np.ndarray, mode: str = "infer",
            want_tape: bool = False):
    """Run the network; returns predictions, or (predictions, tape) for training."""
    cfg = model.config
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ValueError(f"expected (N, {cfg.in_channels}, H, W), got {x.shape}")
    if x.shape[2] % cfg.w or x.shape[3] % cfg.w:
        raise ValueError(f"spatial dims {x.shape[2:]} not divisible by w={cfg.w}")
    train = mode == "train"
    tape = [] if want_tape else None
    cur = x
    for i in range(4):
        xp = layers.pad_input(cur)
        z = kernels.conv3x3_fwd(xp, model.convs[i].weights, model.convs[i].bias,
                                model.convs[i].groups)
        mean, invstd = _bn_prepare(model.bns[i], z, train)
        pooled, idx = kernels.bn_relu_pool_fwd(z, mean, invstd, model.bns[i].gamma,
                                               model.bns[i].beta, cfg.pooling[i])
        if want_tape:
            tape.append({"xp": xp, "z": z, "mean": mean, "invstd": invstd,
                         "pooled": pooled, "idx": idx})
        cur = pooled
    xp = layers.pad_input(cur)
    z = kernels.conv3x3_fwd(xp, model.convs[4].weights, model.convs[4].bias,
                            model.convs[4].groups)
    pooled, idx = layers.maxpool(z, cfg.pooling[4])
    y = layers.sigmoid(pooled)
    if want_tape:
        tape.append({"xp": xp, "z_shape": z.shape, "idx": idx, "y": y})
        return y, tape
    return y


def backward(model: NetworkModel, tape, loss_grad: np.ndarray) -> dict:
    """Gradients of every conv weight/bias and batch-norm gamma/beta."""
    if tape is None or len(tape) != 5:
        raise ValueError("backward needs the tape from a matching forward pass")
    cfg = model.config
    last = tape[4]
    y = last["y"]
    g = (loss_grad * y * (1.0 - y)).astype(y.dtype)
    g = layers.maxpool_backward(g, last["idx"], last["z_shape"], cfg.pooling[4])
    grads = {}
    dx, dw, db = layers.conv3x3_grouped_backward(last["xp"], model.convs[4], g)
    grads["conv5.weight"] = dw
    grads["conv5.bias"] = db
    for i in range(3, -1, -1):
        t = tape[i]
        dz, dgamma, dbeta = kernels.bn_relu_pool_bwd(
            dx, t["pooled"], t["idx"], t["z"], t["mean"], t["invstd"],
            model.bns[i].gamma)
        grads[f"bn{i + 1}.gamma"] = dgamma.astype(model.bns[i].gamma.dtype)
        grads[f"bn{i + 1}.beta"] = dbeta.astype(model.bns[i].beta.dtype)
        dx, dw, db = layers.conv3x3_grouped_backward(t["xp"], model.convs[i], dz,
                                                     need_dx=i > 0)
        grads[f"conv{i + 1}.weight"] = dw
        grads[f"conv{i + 1}.bias"] = db
    return grads
