"""Training: adaptive MAE loss in transformed space, mini-batch RMSProp loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network
from .nn.optim import OptimizerState, rmsprop_step
from .transforms import TransformSpec, update_mu

DEFAULT_BATCH = 16
DEFAULT_EPOCHS = 200


def adaptive_loss(targets_raw: np.ndarray, preds: np.ndarray,
                  transform: TransformSpec):
    """Mean absolute error between transformed targets and predictions.

    Returns (loss, gradient wrt preds); the gradient is -sign(T(Y) - Yhat)/n
    with subgradient 0 at equality.
    """
    if targets_raw.shape != preds.shape:
        raise ValueError(f"shape mismatch {targets_raw.shape} vs {preds.shape}")
    ty = transform.apply(targets_raw).astype(preds.dtype)
    diff = ty - preds
    n = diff.size
    loss = float(np.abs(diff, dtype=np.float64).sum() / n)
    grad = (-np.sign(diff) / n).astype(preds.dtype)
    return loss, grad


def default_holdout(count: int) -> np.ndarray:
    """Indices withheld from training: the last 64 samples when the dataset
    is large enough, else the last 10%."""
    k = 64 if count >= 128 else max(1, count // 10)
    return np.arange(count - k, count)


@dataclass
class TrainStats:
    train_loss: list = field(default_factory=list)
    holdout_loss: list = field(default_factory=list)
    mu_trace: list = field(default_factory=list)


def train(model: network.NetworkModel, inputs: np.ndarray, targets: np.ndarray,
          transform: TransformSpec, optimizer: OptimizerState | None = None,
          epochs: int = DEFAULT_EPOCHS, holdout=None, seed: int = 0,
          batch_size: int = DEFAULT_BATCH, log=None):
    """Train in place; returns (model, TrainStats, final transform).

    Deterministic for a fixed seed: shuffling is the only randomness and the
    batch order is fully determined by it.
    """
    if inputs.shape[0] == 0:
        raise ValueError("empty dataset")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets disagree on sample count")
    if optimizer is None:
        optimizer = OptimizerState()
    count = inputs.shape[0]
    if holdout is None:
        holdout = default_holdout(count)
    holdout = np.asarray(holdout, dtype=np.int64)
    train_idx = np.setdiff1d(np.arange(count), holdout)
    if train_idx.size == 0:
        raise ValueError("holdout leaves no training samples")
    rng = np.random.default_rng(seed)
    params = model.parameters()
    stats = TrainStats()
    for epoch in range(epochs):
        perm = train_idx[rng.permutation(train_idx.size)]
        abs_sum = 0.0
        n_total = 0
        for s in range(0, perm.size, batch_size):
            sel = perm[s:s + batch_size]
            xb = inputs[sel]
            yb = targets[sel]
            preds, tape = network.forward(model, xb, mode="train", want_tape=True)
            loss, grad = adaptive_loss(yb, preds, transform)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {s // batch_size}: {loss}")
            grads = network.backward(model, tape, grad)
            rmsprop_step(params, grads, optimizer)
            abs_sum += loss * preds.size
            n_total += preds.size
            if transform.mu_mode == "running":
                transform = update_mu(transform, yb)
        stats.train_loss.append(abs_sum / n_total)
        stats.holdout_loss.append(
            evaluate_loss(model, inputs[holdout], targets[holdout], transform,
                          batch_size) if holdout.size else float("nan"))
        stats.mu_trace.append(transform.mu)
        if log is not None:
            log(epoch, stats)
    return model, stats, transform


def evaluate_loss(model, inputs, targets, transform: TransformSpec,
                  batch_size: int = DEFAULT_BATCH) -> float:
    """Adaptive-loss value over a set, inference mode, no parameter updates."""
    abs_sum = 0.0
    n = 0
    for s in range(0, inputs.shape[0], batch_size):
        xb = inputs[s:s + batch_size]
        preds = network.forward(model, xb, mode="infer")
        ty = transform.apply(targets[s:s + batch_size]).astype(preds.dtype)
        abs_sum += float(np.abs(ty - preds, dtype=np.float64).sum())
        n += preds.size
    return abs_sum / n


def transform_meta(transform: TransformSpec) -> dict:
    meta = {
        "transform_kind": transform.kind,
        "transform_mu": repr(float(transform.mu)),
        "transform_k": repr(float(transform.k_logistic)),
        "transform_mu_mode": transform.mu_mode,
        "transform_ema_alpha": repr(float(transform.ema_alpha)),
    }
    if transform.per_channel:
        meta["transform_mu_channels"] = ",".join(repr(float(v)) for v in transform.mu_channels)
    return meta


def transform_from_meta(meta: dict) -> TransformSpec:
    per_channel = "transform_mu_channels" in meta
    return TransformSpec(
        kind=meta["transform_kind"], mu=float(meta["transform_mu"]),
        k_logistic=float(meta["transform_k"]), mu_mode=meta["transform_mu_mode"],
        ema_alpha=float(meta["transform_ema_alpha"]), per_channel=per_channel,
        mu_channels=tuple(float(v) for v in meta["transform_mu_channels"].split(","))
        if per_channel else ())
