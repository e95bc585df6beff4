"""End-to-end orchestration shared by the CLI, demos, and acceptance tests:
dataset -> trained model, and the content-adaptive shading demo loop."""

from __future__ import annotations

import os

import numpy as np

from . import network, training, vrs
from .heatmap import rgb_png
from .inference import model_jnd, model_rates, predict_tiles
from .metrics import compute_metric, luminance, tile_aggregate
from .nn.optim import OptimizerState
from .rates import RATE_1X1, REDUCED_RATES, format_rate_list
from .scene.capture import Dataset, assemble_input
from .scene.core import build_scene
from .scene.render import render_gbuffer, shade
from .scene.reproject import reproject
from .scene.sampling import sample_viewpoint_pair
from .training import default_holdout, train, transform_meta
from .transforms import TransformSpec


def train_on_dataset(dataset: Dataset, transform_kind: str = "clamped",
                     k: float = 10.0, mu_mode: str = "precomputed",
                     epochs: int = 200, batch: int = 16, lr: float = 1e-4,
                     seed: int = 0, holdout=None, log=None):
    """Builds, trains, and annotates a model for one captured dataset."""
    mu0 = dataset.mu_y if mu_mode == "precomputed" else 0.25
    mu0 = float(np.clip(mu0, 1e-4, 1 - 1e-4))
    transform = TransformSpec(kind=transform_kind, mu=mu0, k_logistic=k,
                              mu_mode=mu_mode)
    cfg = network.NetworkConfig(w=dataset.w, in_channels=dataset.inputs.shape[1],
                                out_channels=len(dataset.rates))
    model = network.build_network(cfg, seed=[seed, 0])
    if holdout is None:
        holdout = default_holdout(len(dataset.ids))
    optimizer = OptimizerState(learning_rate=lr)
    model, stats, transform = train(
        model, dataset.inputs, dataset.targets, transform, optimizer,
        epochs=epochs, holdout=holdout, seed=[seed, 1], batch_size=batch, log=log)
    model.meta.update({
        "metric": dataset.metric,
        "rates": dataset.manifest["rates"],
        "jnd_t": dataset.manifest["jnd_t"],
        "jnd_l": dataset.manifest["jnd_l"],
        "data_fingerprint": dataset.fingerprint(),
        "holdout_ids": ",".join(str(i) for i in np.asarray(holdout)),
        "train_seed": seed,
        "epochs": epochs,
        "batch": batch,
        "lr": repr(lr),
    })
    model.meta.update(transform_meta(transform))
    return model, stats, transform


def compose_vrs_image(gbuffer, scene, decisions: vrs.RateDecisionMap) -> np.ndarray:
    """Shade each tile at its chosen rate (renders each distinct rate once)."""
    w = decisions.w
    out = shade(gbuffer, RATE_1X1, scene).copy()
    chosen = decisions.rates
    for i in np.unique(chosen):
        rate = vrs.COST_ORDER[i]
        if rate == RATE_1X1:
            continue
        img = shade(gbuffer, rate, scene)
        tiles = np.argwhere(chosen == i)
        for r, c in tiles:
            out[:, r * w:(r + 1) * w, c * w:(c + 1) * w] = \
                img[:, r * w:(r + 1) * w, c * w:(c + 1) * w]
    return out


def ground_truth_decisions(gbuffer, scene, metric, jnd, threshold, weber_model,
                           w: int) -> vrs.RateDecisionMap:
    """Mode selection from measured (not predicted) per-tile errors."""
    reference = shade(gbuffer, RATE_1X1, scene)
    raw = {}
    for rate in REDUCED_RATES:
        e = compute_metric(metric, reference, shade(gbuffer, rate, scene), jnd)
        raw[rate] = tile_aggregate(e, w)
    pred = vrs.TilePrediction(next(iter(raw.values())).shape, raw)
    thr = _threshold_map(reference, jnd, threshold, weber_model, w)
    return vrs.choose_mode(pred, thr, w)


def _threshold_map(reference, jnd, threshold, weber_model, w):
    from .metrics import JndConfig

    cfg = JndConfig(t=threshold, l=jnd.l)
    if weber_model:
        return vrs.threshold_for(True, cfg)
    tile_lum = tile_aggregate(luminance(reference), w)
    return vrs.threshold_for(False, cfg, tile_lum)


def run_vrs_demo(model, scene_name: str, threshold: float, frames: int,
                 out_dir: str, width: int = 256, height: int = 256,
                 seed: int = 0) -> dict:
    """Per frame: predict tile errors, pick rates, render, and compare the
    decisions against ground-truth selection. Returns summary stats."""
    os.makedirs(out_dir, exist_ok=True)
    scene = build_scene(scene_name)
    metric = _model_metric(model)
    jnd = model_jnd(model)
    w = model.config.w
    rates = model_rates(model)
    agreements = []
    lines = [f"scene={scene_name}", f"metric={metric}", f"threshold={threshold!r}",
             f"frames={frames}", f"rates={format_rate_list(rates)}"]
    for fi in range(frames):
        rng = np.random.default_rng([seed, fi])
        prev, cur = sample_viewpoint_pair(scene, rng)
        gb_prev = render_gbuffer(scene, prev, width, height)
        img_prev = shade(gb_prev, RATE_1X1, scene)
        gb_cur = render_gbuffer(scene, cur, width, height)
        reproj_color, mask = reproject(gb_prev, img_prev, gb_cur)
        net_input = assemble_input(gb_cur, reproj_color, mask)

        pred = predict_tiles(model, net_input)
        pred = vrs.extrapolate_rates(pred, vrs.ExtrapolationConfig(predicted=rates))
        reference = shade(gb_cur, RATE_1X1, scene)
        thr = _threshold_map(reference, jnd, threshold, metric.weber, w)
        decisions = vrs.choose_mode(pred, thr, w)
        gt = ground_truth_decisions(gb_cur, scene, metric, jnd, threshold,
                                    metric.weber, w)
        agree = float((decisions.rates == gt.rates).mean())
        agreements.append(agree)

        tag = f"frame{fi:03d}"
        rgb_png(reference, os.path.join(out_dir, f"{tag}_reference.png"))
        vrs.render_rate_map(decisions, os.path.join(out_dir, f"{tag}_rates.png"))
        vrs.render_rate_map(gt, os.path.join(out_dir, f"{tag}_rates_gt.png"))
        with open(os.path.join(out_dir, f"{tag}_rates.txt"), "w") as f:
            f.write(decisions.as_text())
        rgb_png(compose_vrs_image(gb_cur, scene, decisions),
                os.path.join(out_dir, f"{tag}_vrs.png"))
        lines.append(f"{tag}_agreement={agree!r}")
    mean_agree = float(np.mean(agreements))
    lines.append(f"mean_agreement={mean_agree!r}")
    with open(os.path.join(out_dir, "stats.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")
    return {"mean_agreement": mean_agree, "per_frame": agreements}


def _model_metric(model):
    from .inference import model_metric

    return model_metric(model)
