"""Evaluation statistics and reports: R^2 and MAE (total / underestimation
only) between measured and predicted per-tile error, in raw metric space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network
from .inference import model_transform, predict_batch
from .scene.capture import Dataset


def r2_score(y: np.ndarray, yhat: np.ndarray) -> float:
    """Coefficient of determination, 1 - SS_res/SS_tot, 64-bit accumulation."""
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError("shape mismatch")
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    mean = y.mean()
    ss_tot = float(((y - mean) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("targets are constant; R^2 undefined")
    ss_res = float(((y - yhat) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def mae_stats(y: np.ndarray, yhat: np.ndarray):
    """(MAE_total, MAE_under, sigma_MAE); underestimation restricted to
    yhat < y, the direction that risks visible quality loss."""
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError("shape mismatch")
    if y.size == 0:
        raise ValueError("empty input")
    err = y - yhat
    abs_err = np.abs(err)
    mae_total = float(abs_err.mean())
    under = err > 0
    mae_under = float(err[under].mean()) if under.any() else 0.0
    sigma = float(abs_err.std())
    return mae_total, mae_under, sigma


@dataclass
class EvalReport:
    scene: str
    metric: str
    samples: int
    values: int
    r2: float
    mae_total: float
    mae_under: float
    under_count: int
    sigma_mae: float
    var_mae: float
    config_echo: dict
    subset: str  # holdout | all

    def consistency_ok(self) -> bool:
        # sum of underestimation errors cannot exceed the total error mass
        return self.mae_under * self.under_count <= self.mae_total * self.values * (1 + 1e-12)

    def render(self) -> str:
        lines = [
            "== evaluation report ==",
            f"scene={self.scene}",
            f"metric={self.metric}",
            f"subset={self.subset}",
            f"samples={self.samples}",
            f"values={self.values}",
            f"r2={self.r2:.9f}",
            f"mae_total={self.mae_total:.9e}",
            f"mae_under={self.mae_under:.9e}",
            f"under_count={self.under_count}",
            f"sigma_mae={self.sigma_mae:.9e}",
            f"var_mae={self.var_mae:.9e}",
            f"consistency={'ok' if self.consistency_ok() else 'violated'}",
        ]
        for k in sorted(self.config_echo):
            lines.append(f"{k}={self.config_echo[k]}")
        return "\n".join(lines) + "\n"


def evaluation_indices(model: network.NetworkModel, dataset: Dataset) -> tuple:
    """Holdout ids when evaluating the training dataset; everything otherwise."""
    meta = model.meta
    if meta.get("data_fingerprint") == dataset.fingerprint() and meta.get("holdout_ids"):
        ids = np.array([int(i) for i in meta["holdout_ids"].split(",")])
        return ids, "holdout"
    return dataset.ids, "all"


def evaluate(model: network.NetworkModel, dataset: Dataset,
             transform=None) -> EvalReport:
    """Predict the evaluation subset, invert the transform, and score in raw
    metric space. The model and dataset must record the same metric."""
    model_metric = model.meta.get("metric")
    if model_metric is not None and model_metric != dataset.metric:
        raise ValueError(f"model was trained on {model_metric!r} but the dataset "
                         f"records {dataset.metric!r}")
    if transform is None:
        transform = model_transform(model)
    ids, subset = evaluation_indices(model, dataset)
    preds = predict_batch(model, dataset.inputs[ids])
    raw = transform.invert(preds)
    y = dataset.targets[ids].astype(np.float64)
    mae_total, mae_under, sigma = mae_stats(y, raw)
    under_count = int((y.ravel() > np.asarray(raw, dtype=np.float64).ravel()).sum())
    echo = {
        "mu_y": model.meta.get("transform_mu", ""),
        "transform": transform.kind,
        "w": dataset.w,
        "rates": dataset.manifest["rates"],
        "capture_seed": dataset.manifest["capture_seed"],
        "train_seed": model.meta.get("train_seed", ""),
        "data_fingerprint": dataset.fingerprint(),
    }
    return EvalReport(
        scene=dataset.scene, metric=dataset.metric, samples=len(ids),
        values=int(np.prod(dataset.targets[ids].shape)),
        r2=r2_score(y, raw), mae_total=mae_total, mae_under=mae_under,
        under_count=under_count, sigma_mae=sigma, var_mae=sigma * sigma,
        config_echo=echo, subset=subset)
