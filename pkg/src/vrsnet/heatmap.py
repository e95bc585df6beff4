"""PNG export helpers: error-map heatmaps and RGB image dumps."""

from __future__ import annotations

import numpy as np

# colormap anchors at v = 0, 1/3, 2/3, 1
_ANCHORS = np.array([
    [0.0, 0.0, 0.0],   # black
    [0.0, 0.0, 1.0],   # blue
    [1.0, 0.0, 0.0],   # red
    [1.0, 1.0, 1.0],   # white
])


def colormap(values: np.ndarray) -> np.ndarray:
    """Piecewise-linear map [0,1] -> uint8 RGB through the anchor colors."""
    v = np.asarray(values, dtype=np.float64)
    if np.any(v < 0) or np.any(v > 1):
        raise ValueError("heatmap values must lie in [0,1]")
    pos = v * 3.0
    seg = np.clip(pos.astype(np.int64), 0, 2)
    frac = pos - seg
    lo = _ANCHORS[seg]
    hi = _ANCHORS[seg + 1]
    rgb = lo + (hi - lo) * frac[..., None]
    return np.rint(rgb * 255.0).astype(np.uint8)


def heatmap_png(values: np.ndarray, path, scale: int = 1) -> None:
    """Write an (H, W) map in [0,1] as a colormapped 8-bit PNG."""
    from PIL import Image

    v = np.asarray(values)
    if scale > 1:
        v = np.repeat(np.repeat(v, scale, axis=0), scale, axis=1)
    Image.fromarray(colormap(v)).save(path)


def rgb_png(image: np.ndarray, path) -> None:
    """Write a (3, H, W) float image in [0,1] as PNG."""
    from PIL import Image

    arr = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0)).save(path)
