"""Per-pixel visual error between a reference render and a reduced-rate render.

Three base metrics on tone-mapped [0,1] images:

  rmse  - per-pixel Euclidean RGB difference / sqrt(3)
  mald  - per-pixel absolute luminance difference
  sflip - absolute difference of Gaussian-prefiltered cube-root luminance
          (sigma = 1.5 px, kernel radius ceil(3 sigma) = 5, edge clamp)

Any base metric composes with a Weber correction E / (L + l) that folds the
just-noticeable-difference threshold into the value itself: a corrected value
is comparable against the constant sensitivity t instead of t*(L + l).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

SFLIP_SIGMA = 1.5
# scipy truncates at int(truncate*sigma + 0.5); 3.0 * 1.5 -> radius 5 = ceil(3 sigma)
SFLIP_TRUNCATE = 3.0

BASE_METRICS = ("rmse", "mald", "sflip")


@dataclass(frozen=True)
class MetricId:
    base: str
    weber: bool = False

    def __post_init__(self):
        if self.base not in BASE_METRICS:
            raise ValueError(f"unknown metric {self.base!r}")

    def __str__(self):
        return self.base + ("+weber" if self.weber else "")

    @classmethod
    def parse(cls, text: str) -> "MetricId":
        base, _, suffix = text.partition("+")
        return cls(base, weber=suffix == "weber")


@dataclass
class JndConfig:
    """Weber threshold parameters: sensitivity t and environment luminance l."""

    t: float = 0.25
    l: float = 0.05

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("sensitivity t must be > 0")
        if self.l < 0:
            raise ValueError("environment luminance l must be >= 0")


def luminance(image: np.ndarray) -> np.ndarray:
    """Rec. 709 luma of a (3, H, W) image."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected (3, H, W), got {img.shape}")
    return 0.2126 * img[0] + 0.7152 * img[1] + 0.0722 * img[2]


def _check_pair(a, b):
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")


def rmse_metric(ref: np.ndarray, img: np.ndarray) -> np.ndarray:
    _check_pair(ref, img)
    d = np.asarray(ref, dtype=np.float64) - np.asarray(img, dtype=np.float64)
    return np.sqrt((d * d).sum(axis=0) / 3.0)


def mald_metric(ref: np.ndarray, img: np.ndarray) -> np.ndarray:
    _check_pair(ref, img)
    return np.abs(luminance(ref) - luminance(img))


def _prefiltered_lightness(image: np.ndarray) -> np.ndarray:
    p = np.cbrt(luminance(image))
    return gaussian_filter(p, SFLIP_SIGMA, mode="nearest", truncate=SFLIP_TRUNCATE)


def sflip_metric(ref: np.ndarray, img: np.ndarray) -> np.ndarray:
    _check_pair(ref, img)
    e = np.abs(_prefiltered_lightness(ref) - _prefiltered_lightness(img))
    return np.clip(e, 0.0, 1.0)


METRIC_FNS = {"rmse": rmse_metric, "mald": mald_metric, "sflip": sflip_metric}


def compute_metric(metric: MetricId, ref: np.ndarray, img: np.ndarray,
                   jnd: JndConfig | None = None) -> np.ndarray:
    """Full metric evaluation, including the Weber correction when flagged.

    Weber correction divides by reference-image luminance (decision: the
    reference is the stable signal; the reduced image varies with the rate).
    """
    e = METRIC_FNS[metric.base](ref, img)
    if metric.weber:
        if jnd is None:
            jnd = JndConfig()
        e = weber_correct(e, luminance(ref), jnd)
    return e


def weber_correct(error_map: np.ndarray, lum: np.ndarray, cfg: JndConfig) -> np.ndarray:
    """E / (L + l), clamped to [0,1].

    Pre-clamp, E <= t*(L+l) iff corrected <= t, so selection against a
    constant threshold is equivalent to the luminance-dependent comparison.
    """
    if error_map.shape != lum.shape:
        raise ValueError("error map and luminance map shapes differ")
    denom = np.asarray(lum, dtype=np.float64) + cfg.l
    if np.any(denom <= 0):
        raise ValueError("L + l must be > 0 at every corrected pixel")
    return np.clip(error_map / denom, 0.0, 1.0)


def jnd_threshold(lum: np.ndarray, cfg: JndConfig) -> np.ndarray:
    """W = t * (L + l); the per-pixel threshold for raw (uncorrected) metrics."""
    return cfg.t * (np.asarray(lum, dtype=np.float64) + cfg.l)


def tile_aggregate(error_map: np.ndarray, w: int, mode: str = "mean") -> np.ndarray:
    """Reduce an (H, W) map to (H/w, W/w) tiles by mean (default) or max."""
    e = np.asarray(error_map)
    h, wd = e.shape
    if h % w or wd % w:
        raise ValueError(f"dims {e.shape} not divisible by tile size {w}")
    tiles = e.reshape(h // w, w, wd // w, w)
    if mode == "mean":
        return tiles.mean(axis=(1, 3))
    if mode == "max":
        return tiles.max(axis=(1, 3))
    raise ValueError(f"unknown aggregation {mode!r}")
