"""Frozen-model inference: per-tile predictions and model metadata access."""

from __future__ import annotations

import numpy as np

from . import network
from .metrics import JndConfig, MetricId
from .rates import PREDICTED_RATES, parse_rate_list
from .training import transform_from_meta
from .transforms import TransformSpec
from .vrs import TilePrediction


def model_transform(model: network.NetworkModel) -> TransformSpec:
    return transform_from_meta(model.meta)


def model_rates(model: network.NetworkModel):
    rates = model.meta.get("rates")
    return parse_rate_list(rates) if rates else PREDICTED_RATES


def model_metric(model: network.NetworkModel) -> MetricId:
    return MetricId.parse(model.meta.get("metric", "mald"))


def model_jnd(model: network.NetworkModel) -> JndConfig:
    return JndConfig(t=float(model.meta.get("jnd_t", 0.25)),
                     l=float(model.meta.get("jnd_l", 0.05)))


def predict_batch(model: network.NetworkModel, inputs: np.ndarray,
                  batch_size: int = 16) -> np.ndarray:
    """Inference-mode forward over (S, C, H, W); returns transformed-space
    predictions (S, R, H/w, W/w). Batch composition cannot change results."""
    outs = [network.forward(model, inputs[s:s + batch_size], mode="infer")
            for s in range(0, inputs.shape[0], batch_size)]
    return np.concatenate(outs, axis=0)


def predict_tiles(model: network.NetworkModel, net_input: np.ndarray,
                  transform: TransformSpec | None = None,
                  rates=None) -> TilePrediction:
    """Per-tile, per-rate predictions for one assembled 4-channel frame.

    Returns both the transformed-space values and their raw inverses; the
    channel order equals the configured rate list order.
    """
    if net_input.ndim != 3:
        raise ValueError(f"expected (C, H, W), got {net_input.shape}")
    if transform is None:
        transform = model_transform(model)
    if rates is None:
        rates = model_rates(model)
    if len(rates) != model.config.out_channels:
        raise ValueError(f"model has {model.config.out_channels} output channels "
                         f"but {len(rates)} rates were given")
    preds = network.forward(model, net_input[None], mode="infer")[0]
    raw = transform.invert(preds)
    shape = preds.shape[1:]
    return TilePrediction(
        shape=shape,
        raw={r: np.asarray(raw[i], dtype=np.float64) for i, r in enumerate(rates)},
        transformed={r: preds[i] for i, r in enumerate(rates)},
        provenance={r: "predicted" for r in rates})
