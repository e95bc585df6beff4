"""Layer types and their forward/backward operations.

Only the layer kinds the predictor network needs: grouped 3x3 convolution
(stride/padding/dilation 1), batch normalization, ReLU, sigmoid, max pooling.
Everything is functional: layers hold parameters, ops take and return arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass
class ConvLayer:
    """3x3 grouped convolution; weights (out, in/groups, 3, 3)."""

    weights: np.ndarray
    bias: np.ndarray
    groups: int = 1

    def __post_init__(self):
        if self.weights.ndim != 4 or self.weights.shape[2:] != (3, 3):
            raise ValueError(f"kernel must be (out, in/groups, 3, 3), got {self.weights.shape}")
        if self.out_channels % self.groups:
            raise ValueError("groups must divide out_channels")
        if self.bias.shape != (self.out_channels,):
            raise ValueError("bias length must equal out_channels")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1] * self.groups


@dataclass
class BatchNormLayer:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.momentum < 1.0):
            raise ValueError("momentum must be in (0,1)")
        if np.any(self.running_var < 0):
            raise ValueError("running_var must be >= 0")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def make_conv(in_channels: int, out_channels: int, groups: int, rng,
              dtype=np.float32) -> ConvLayer:
    """Fan-in-scaled normal init: std = sqrt(2 / (fan_in * 9)), zero bias."""
    if in_channels % groups or out_channels % groups:
        raise ValueError(f"groups={groups} must divide channels ({in_channels}->{out_channels})")
    cig = in_channels // groups
    std = np.sqrt(2.0 / (cig * 9))
    w = rng.normal(0.0, std, size=(out_channels, cig, 3, 3)).astype(dtype)
    return ConvLayer(w, np.zeros(out_channels, dtype), groups)


def make_batchnorm(channels: int, eps: float = 1e-5, momentum: float = 0.1,
                   dtype=np.float32) -> BatchNormLayer:
    return BatchNormLayer(np.ones(channels, dtype), np.zeros(channels, dtype),
                          np.zeros(channels, dtype), np.ones(channels, dtype),
                          eps, momentum)


def pad_input(x: np.ndarray) -> np.ndarray:
    """Zero padding of width 1 around the spatial dims."""
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2, w + 2), x.dtype)
    xp[:, :, 1:-1, 1:-1] = x
    return xp


def conv3x3_grouped(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Forward conv; output spatial size equals input size (zero padding 1)."""
    if x.ndim != 4:
        raise ValueError(f"expected (N, C, H, W), got {x.shape}")
    if x.shape[1] != layer.in_channels:
        raise ValueError(f"input has {x.shape[1]} channels, layer expects {layer.in_channels}")
    return kernels.conv3x3_fwd(pad_input(x), layer.weights, layer.bias, layer.groups)


def conv3x3_grouped_backward(xp: np.ndarray, layer: ConvLayer, gy: np.ndarray,
                             need_dx: bool = True):
    """Gradients from a padded input saved at forward time.

    Returns (dx, dweights, dbias); dx is None when need_dx is False.
    """
    dw, db = kernels.conv3x3_dw(xp, gy, layer.groups, layer.weights.shape[1])
    dx = None
    if need_dx:
        # dx is a conv of gy with in/out roles swapped and taps flipped
        wt = np.ascontiguousarray(_transpose_flip(layer.weights, layer.groups))
        zero_bias = np.zeros(wt.shape[0], gy.dtype)
        dx = kernels.conv3x3_fwd(pad_input(gy), wt, zero_bias, layer.groups)
    return dx, dw, db


def _transpose_flip(w: np.ndarray, groups: int) -> np.ndarray:
    cout, cig = w.shape[:2]
    cog = cout // groups
    cin = cig * groups
    wt = np.empty((cin, cog, 3, 3), w.dtype)
    for g in range(groups):
        blk = w[g * cog:(g + 1) * cog]  # (cog, cig, 3, 3)
        wt[g * cig:(g + 1) * cig] = blk.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
    return wt


def batchnorm(x: np.ndarray, layer: BatchNormLayer, mode: str = "infer") -> np.ndarray:
    """Standalone batch norm. Train mode normalizes with batch statistics and
    updates running stats in place; infer mode uses the running stats."""
    if x.shape[1] != layer.channels:
        raise ValueError(f"input has {x.shape[1]} channels, layer has {layer.channels}")
    if mode == "train":
        m = x.shape[0] * x.shape[2] * x.shape[3]
        if m < 2:
            raise ValueError("train-mode batch norm needs at least 2 values per channel")
        mean, var = kernels.bn_stats(x)
        mom = layer.momentum
        layer.running_mean[:] = ((1 - mom) * layer.running_mean + mom * mean).astype(
            layer.running_mean.dtype)
        layer.running_var[:] = ((1 - mom) * layer.running_var + mom * var).astype(
            layer.running_var.dtype)
    elif mode == "infer":
        mean = layer.running_mean.astype(np.float64)
        var = layer.running_var.astype(np.float64)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    invstd = 1.0 / np.sqrt(var + layer.eps)
    return kernels.bn_affine(x, mean, invstd, layer.gamma, layer.beta, relu=False)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def maxpool(x: np.ndarray, factor: int):
    """Max pooling by factor; returns (pooled, argmax indices for backward)."""
    if factor == 1:
        return x, None
    return kernels.pool_fwd(x, factor)


def maxpool_backward(gy: np.ndarray, idx, in_shape, factor: int) -> np.ndarray:
    if factor == 1:
        return gy
    return kernels.pool_bwd(gy, idx, in_shape)
