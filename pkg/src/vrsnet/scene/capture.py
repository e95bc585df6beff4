"""Dataset capture: render viewpoint pairs, reproject, measure per-tile error
at every requested shading rate, and write samples + a manifest.

Dataset layout:
  <out_dir>/manifest.txt            key=value lines (scene/capture seeds,
                                    count, w, rates, metric, channel order,
                                    target mean mu_y, ...)
  <out_dir>/sample_00000/input.pten   (4, H, W) network input
  <out_dir>/sample_00000/targets.pten (R, H/w, W/w) per-rate tile error
  <out_dir>/sample_00000/meta.txt     cameras + sample provenance

Input channel order is fixed: reprojection mask, reprojected color R,
diffuse color R, view-space normal Z.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..metrics import JndConfig, MetricId, compute_metric, tile_aggregate
from ..rates import RATE_1X1, ShadingRate, format_rate_list, parse_rate_list
from ..tensorio import load_tensor, save_tensor
from .core import Camera, Scene, build_scene
from .render import render_gbuffer, shade
from .reproject import reproject
from .sampling import sample_viewpoint_pair

MANIFEST_VERSION = 1
CHANNEL_ORDER = "mask,reproj_r,diffuse_r,normal_z"


def assemble_input(gbuffer, reproj_color: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """The 4-channel network input for one frame."""
    return np.stack([mask, reproj_color[0], gbuffer.diffuse[0],
                     gbuffer.normal_view[2]]).astype(np.float32)


@dataclass
class CapturedSample:
    index: int
    net_input: np.ndarray  # (4, H, W)
    targets: dict  # metric key -> (R, H/w, W/w)
    prev_camera: Camera
    cur_camera: Camera
    unseen_frac: float


def render_sample(scene: Scene, prev: Camera, cur: Camera, width: int, height: int,
                  rates, metrics, jnd: JndConfig, w: int, aggregate: str = "mean",
                  index: int = 0) -> CapturedSample:
    """The full per-sample pipeline from a fixed viewpoint pair."""
    gb_prev = render_gbuffer(scene, prev, width, height)
    img_prev = shade(gb_prev, RATE_1X1, scene)
    gb_cur = render_gbuffer(scene, cur, width, height)
    reproj_color, mask = reproject(gb_prev, img_prev, gb_cur)
    reference = shade(gb_cur, RATE_1X1, scene)
    targets = {}
    for m in metrics:
        targets[str(m)] = np.empty((len(rates), height // w, width // w), np.float32)
    for ri, rate in enumerate(rates):
        reduced = shade(gb_cur, rate, scene)
        for m in metrics:
            e = compute_metric(m, reference, reduced, jnd)
            targets[str(m)][ri] = tile_aggregate(e, w, aggregate).astype(np.float32)
    geo = ~gb_cur.sky
    unseen = float((mask[geo] == 0).mean()) if geo.any() else 1.0
    return CapturedSample(index, assemble_input(gb_cur, reproj_color, mask),
                          targets, prev, cur, unseen)


def capture_sample(scene: Scene, capture_seed: int, index: int, width: int,
                   height: int, rates, metrics, jnd: JndConfig, w: int,
                   aggregate: str = "mean") -> CapturedSample:
    """Deterministic sample: the RNG stream is derived from (seed, index)."""
    rng = np.random.default_rng([capture_seed, index])
    prev, cur = sample_viewpoint_pair(scene, rng)
    return render_sample(scene, prev, cur, width, height, rates, metrics, jnd, w,
                         aggregate, index)


def _sample_dir(out_dir: str, index: int) -> str:
    return os.path.join(out_dir, f"sample_{index:05d}")


def _write_sample(out_dir: str, sample: CapturedSample, metric_key: str) -> None:
    d = _sample_dir(out_dir, sample.index)
    os.makedirs(d, exist_ok=True)
    save_tensor(os.path.join(d, "input.pten"), sample.net_input)
    save_tensor(os.path.join(d, "targets.pten"), sample.targets[metric_key])
    lines = [f"sample={sample.index}", f"unseen_frac={sample.unseen_frac!r}"]
    lines += sample.prev_camera.meta_lines("prev")
    lines += sample.cur_camera.meta_lines("cur")
    with open(os.path.join(d, "meta.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


def capture_dataset(scene: Scene, count: int, metrics, jnd: JndConfig, rates,
                    w: int, out_dirs, width: int = 256, height: int = 256,
                    capture_seed: int = 0, aggregate: str = "mean",
                    progress=None) -> list:
    """Capture `count` samples; each metric gets its own dataset directory
    computed from the same rendered frames. Returns the manifest dicts."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not rates:
        raise ValueError("rates must be non-empty")
    metrics = [MetricId.parse(m) if isinstance(m, str) else m for m in metrics]
    if len(metrics) != len(out_dirs):
        raise ValueError("need one output directory per metric")
    if width % w or height % w:
        raise ValueError(f"resolution {width}x{height} not divisible by w={w}")
    for rate in rates:
        if width % rate.u or height % rate.v:
            raise ValueError(f"resolution not divisible by rate {rate}")
    for d in out_dirs:
        os.makedirs(d, exist_ok=True)
    mu_sum = {str(m): 0.0 for m in metrics}
    mu_n = {str(m): 0 for m in metrics}
    unseen_sum = 0.0
    for i in range(count):
        s = capture_sample(scene, capture_seed, i, width, height, rates, metrics,
                           jnd, w, aggregate)
        for m, d in zip(metrics, out_dirs):
            _write_sample(d, s, str(m))
            mu_sum[str(m)] += float(s.targets[str(m)].sum(dtype=np.float64))
            mu_n[str(m)] += s.targets[str(m)].size
        unseen_sum += s.unseen_frac
        if progress is not None:
            progress(i, count)
    manifests = []
    for m, d in zip(metrics, out_dirs):
        manifest = {
            "version": MANIFEST_VERSION,
            "scene": scene.name,
            "scene_seed": scene.seed,
            "capture_seed": capture_seed,
            "count": count,
            "w": w,
            "res": f"{width}x{height}",
            "rates": format_rate_list(rates),
            "metric": str(m),
            "jnd_t": repr(jnd.t),
            "jnd_l": repr(jnd.l),
            "aggregate": aggregate,
            "channel_order": CHANNEL_ORDER,
            "mu_y": repr(mu_sum[str(m)] / mu_n[str(m)]),
            "mean_unseen": repr(unseen_sum / count),
        }
        _write_manifest(d, manifest)
        manifests.append(manifest)
    return manifests


def _write_manifest(out_dir: str, manifest: dict) -> None:
    lines = [f"{k}={manifest[k]}" for k in manifest]
    with open(os.path.join(out_dir, "manifest.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


def read_manifest(path: str) -> dict:
    manifest = {}
    with open(os.path.join(path, "manifest.txt")) as f:
        for line in f:
            line = line.strip()
            if line:
                k, _, v = line.partition("=")
                manifest[k] = v
    return manifest


@dataclass
class Dataset:
    path: str
    manifest: dict
    inputs: np.ndarray  # (S, 4, H, W)
    targets: np.ndarray  # (S, R, H/w, W/w)
    ids: np.ndarray

    @property
    def metric(self) -> str:
        return self.manifest["metric"]

    @property
    def rates(self):
        return parse_rate_list(self.manifest["rates"])

    @property
    def w(self) -> int:
        return int(self.manifest["w"])

    @property
    def mu_y(self) -> float:
        return float(self.manifest["mu_y"])

    @property
    def scene(self) -> str:
        return self.manifest["scene"]

    def fingerprint(self) -> str:
        m = self.manifest
        return (f"{m['scene']}:{m['scene_seed']}:{m['capture_seed']}:"
                f"{m['count']}:{m['metric']}:{m['w']}:{m['res']}")

    def sample_meta(self, index: int) -> dict:
        meta = {}
        with open(os.path.join(_sample_dir(self.path, index), "meta.txt")) as f:
            for line in f:
                line = line.strip()
                if line:
                    k, _, v = line.partition("=")
                    meta[k] = v
        return meta


def load_dataset(path: str) -> Dataset:
    manifest = read_manifest(path)
    count = int(manifest["count"])
    inputs, targets = [], []
    for i in range(count):
        d = _sample_dir(path, i)
        inputs.append(load_tensor(os.path.join(d, "input.pten")))
        targets.append(load_tensor(os.path.join(d, "targets.pten")))
    return Dataset(path, manifest, np.stack(inputs), np.stack(targets),
                   np.arange(count))


def scene_from_manifest(manifest: dict) -> Scene:
    scene = build_scene(manifest["scene"])
    if scene.seed != int(manifest["scene_seed"]):
        raise ValueError("bundled scene seed changed; dataset is from another build")
    return scene
