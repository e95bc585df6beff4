"""Command-line interface: capture, train, evaluate, predict, vrs-demo."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .evaluation import evaluate
from .heatmap import heatmap_png
from .inference import model_rates, predict_tiles
from .metrics import JndConfig, MetricId
from .modelio import load_model_file, save_model_file
from .pipeline import run_vrs_demo, train_on_dataset
from .rates import parse_rate_list
from .scene.capture import capture_dataset, load_dataset
from .scene.core import SCENE_SEEDS, build_scene


def _parse_res(text: str):
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _cmd_capture(args):
    scene = build_scene(args.scene)
    width, height = _parse_res(args.res)
    metric = MetricId(args.metric, weber=args.weber)
    jnd = JndConfig(t=args.t, l=args.l)
    rates = parse_rate_list(args.rates)

    def progress(i, n):
        if (i + 1) % 50 == 0 or i + 1 == n:
            print(f"  captured {i + 1}/{n}", flush=True)

    manifests = capture_dataset(scene, args.count, [metric], jnd, rates, args.w,
                                [args.out], width, height, args.seed,
                                progress=progress)
    print(f"wrote {args.count} samples to {args.out} "
          f"(mu_y={manifests[0]['mu_y']}, mean_unseen={manifests[0]['mean_unseen']})")


def _cmd_train(args):
    dataset = load_dataset(args.data)

    def log(epoch, stats):
        if (epoch + 1) % 10 == 0 or epoch == 0:
            print(f"  epoch {epoch + 1}: train={stats.train_loss[-1]:.5f} "
                  f"holdout={stats.holdout_loss[-1]:.5f}", flush=True)

    model, stats, _ = train_on_dataset(
        dataset, transform_kind=args.transform, k=args.k, mu_mode=args.mu_mode,
        epochs=args.epochs, batch=args.batch, lr=args.lr, seed=args.seed, log=log)
    save_model_file(model, args.out)
    print(f"saved {args.out} (final train loss {stats.train_loss[-1]:.5f}, "
          f"holdout {stats.holdout_loss[-1]:.5f})")


def _cmd_evaluate(args):
    model = load_model_file(args.model)
    dataset = load_dataset(args.data)
    report = evaluate(model, dataset)
    text = report.render()
    with open(args.report, "w") as f:
        f.write(text)
    print(text, end="")


def _cmd_predict(args):
    model = load_model_file(args.model)
    dataset = load_dataset(args.data)
    rates = model_rates(model)
    pred = predict_tiles(model, dataset.inputs[args.sample])
    panel = np.concatenate([pred.transformed[r] for r in rates], axis=1)
    heatmap_png(panel, args.out_heatmap, scale=dataset.w)
    for r in rates:
        print(f"rate {r}: mean predicted (raw) = {pred.raw[r].mean():.6f}")
    print(f"wrote {args.out_heatmap} ({len(rates)} rate panels left to right)")


def _cmd_vrs_demo(args):
    model = load_model_file(args.model)
    stats = run_vrs_demo(model, args.scene, args.threshold, args.frames,
                         args.out_dir)
    print(f"mean predicted-vs-ground-truth rate agreement: "
          f"{stats['mean_agreement']:.3f} over {args.frames} frame(s)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vrsnet",
                                description="tile shading-rate error prediction")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("capture", help="render a training dataset")
    c.add_argument("--scene", choices=sorted(SCENE_SEEDS), required=True)
    c.add_argument("--count", type=int, default=1000)
    c.add_argument("--res", default="256x256")
    c.add_argument("--w", type=int, default=16)
    c.add_argument("--metric", choices=["rmse", "mald", "sflip"], required=True)
    c.add_argument("--weber", action="store_true")
    c.add_argument("--t", type=float, default=0.25)
    c.add_argument("--l", type=float, default=0.05)
    c.add_argument("--rates", default="1x2,2x1,2x4,4x2")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_capture)

    t = sub.add_parser("train", help="train a predictor on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--transform", choices=["clamped", "logistic", "identity"],
                   default="clamped")
    t.add_argument("--k", type=float, default=10.0)
    t.add_argument("--mu-mode", choices=["running", "precomputed"],
                   default="precomputed", dest="mu_mode")
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="score a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True)
    e.set_defaults(func=_cmd_evaluate)

    d = sub.add_parser("predict", help="per-tile prediction heatmap for one sample")
    d.add_argument("--model", required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--sample", type=int, required=True)
    d.add_argument("--out-heatmap", required=True, dest="out_heatmap")
    d.set_defaults(func=_cmd_predict)

    v = sub.add_parser("vrs-demo", help="content-adaptive shading demo")
    v.add_argument("--model", required=True)
    v.add_argument("--scene", choices=sorted(SCENE_SEEDS), required=True)
    v.add_argument("--threshold", type=float, default=0.25)
    v.add_argument("--frames", type=int, default=1)
    v.add_argument("--out-dir", required=True, dest="out_dir")
    v.set_defaults(func=_cmd_vrs_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
