"""Shading-rate selection from per-tile error predictions.

The network predicts four rate channels; the remaining rates are
extrapolated with a constant relative error growth kappa per halving of the
shading rate. Mode selection walks rates from cheapest to most expensive and
takes the first whose predicted error is under the threshold, falling back
to full-rate shading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import JndConfig
from .rates import (COST_ORDER, PREDICTED_RATES, RATE_1X1, REDUCED_RATES,
                    ShadingRate)

DEFAULT_KAPPA = 2.13


@dataclass
class ExtrapolationConfig:
    kappa: float = DEFAULT_KAPPA
    predicted: tuple = PREDICTED_RATES
    derived: tuple = ()

    def __post_init__(self):
        if self.kappa <= 1.0:
            raise ValueError("kappa must be > 1")
        if not self.derived:
            self.derived = tuple(r for r in REDUCED_RATES if r not in self.predicted)


@dataclass
class TilePrediction:
    """Per-tile error values in raw (inverse-transformed) metric space."""

    shape: tuple  # (tile_rows, tile_cols)
    raw: dict  # ShadingRate -> (rows, cols) array
    transformed: dict | None = None
    provenance: dict = field(default_factory=dict)  # rate -> predicted|extrapolated

    def value(self, rate: ShadingRate) -> np.ndarray:
        if rate == RATE_1X1:
            return np.zeros(self.shape)
        return self.raw[rate]


# extrapolation dependency order: each rate's sources are already available
_EXTRAP_ORDER = [ShadingRate(2, 2), ShadingRate(2, 4), ShadingRate(4, 2),
                 ShadingRate(4, 4)]


def _extrapolate_one(rate: ShadingRate, have: dict, kappa: float) -> np.ndarray:
    u, v = rate.u, rate.v
    if u == v:
        return np.maximum(have[ShadingRate(u // 2, v)], have[ShadingRate(u, v // 2)])
    if u > v:
        return np.maximum(have[ShadingRate(u // 2, v // 2)] * kappa,
                          have[ShadingRate(u // 2, v)])
    return np.maximum(have[ShadingRate(u // 2, v // 2)] * kappa,
                      have[ShadingRate(u, v // 2)])


def extrapolate_rates(pred: TilePrediction,
                      cfg: ExtrapolationConfig | None = None) -> TilePrediction:
    """Fill every reduced rate; predicted channels pass through untouched."""
    if cfg is None:
        cfg = ExtrapolationConfig()
    have = dict(pred.raw)
    for r in cfg.predicted:
        if r not in have:
            raise ValueError(f"missing predicted channel {r}")
    provenance = {r: "predicted" for r in have}
    for rate in _EXTRAP_ORDER:
        if rate in have:
            continue
        have[rate] = _extrapolate_one(rate, have, cfg.kappa)
        provenance[rate] = "extrapolated"
    return TilePrediction(pred.shape, have, pred.transformed, provenance)


@dataclass
class RateDecisionMap:
    rates: np.ndarray  # (rows, cols) of indices into COST_ORDER
    threshold: np.ndarray  # per-tile threshold actually used
    w: int = 16

    def rate_at(self, row: int, col: int) -> ShadingRate:
        return COST_ORDER[self.rates[row, col]]

    def as_text(self) -> str:
        lines = []
        for row in range(self.rates.shape[0]):
            lines.append(" ".join(str(COST_ORDER[i]) for i in self.rates[row]))
        return "\n".join(lines) + "\n"


def choose_mode(pred: TilePrediction, threshold, w: int = 16) -> RateDecisionMap:
    """Cheapest mode whose predicted error is below the threshold, else 1x1.

    threshold may be a scalar or a per-tile array.
    """
    thr = np.broadcast_to(np.asarray(threshold, dtype=np.float64), pred.shape)
    if np.any(thr <= 0):
        raise ValueError("threshold must be > 0")
    rows, cols = pred.shape
    chosen = np.full((rows, cols), COST_ORDER.index(RATE_1X1), dtype=np.int8)
    undecided = np.ones((rows, cols), dtype=bool)
    for i, rate in enumerate(COST_ORDER):
        if rate == RATE_1X1:
            break
        ok = undecided & (pred.value(rate) < thr)
        chosen[ok] = i
        undecided &= ~ok
    return RateDecisionMap(chosen, np.array(thr), w)


def threshold_for(weber_model: bool, jnd: JndConfig, tile_luminance=None):
    """Per-tile thresholds: Weber-corrected models use the constant t; raw
    models scale it by tile luminance, t*(L + l)."""
    if weber_model:
        if tile_luminance is not None:
            raise ValueError("Weber-corrected model uses a constant threshold; "
                             "no luminance map applies")
        return jnd.t
    if tile_luminance is None:
        raise ValueError("raw-metric model needs per-tile luminance")
    return jnd.t * (np.asarray(tile_luminance, dtype=np.float64) + jnd.l)


# rate map colors: full white, fine green, medium yellow, coarse red
RATE_COLORS = {
    RATE_1X1: (255, 255, 255),
    ShadingRate(2, 1): (0, 200, 70), ShadingRate(1, 2): (0, 200, 70),
    ShadingRate(2, 2): (235, 200, 0), ShadingRate(2, 4): (235, 200, 0),
    ShadingRate(4, 2): (235, 200, 0),
    ShadingRate(4, 4): (220, 40, 40),
}


def rate_map_image(decisions: RateDecisionMap) -> np.ndarray:
    """(H, W, 3) uint8 image, each tile drawn as a w x w block."""
    rows, cols = decisions.rates.shape
    w = decisions.w
    img = np.zeros((rows * w, cols * w, 3), np.uint8)
    for r in range(rows):
        for c in range(cols):
            img[r * w:(r + 1) * w, c * w:(c + 1) * w] = RATE_COLORS[
                COST_ORDER[decisions.rates[r, c]]]
    return img


def render_rate_map(decisions: RateDecisionMap, path) -> None:
    from PIL import Image

    Image.fromarray(rate_map_image(decisions)).save(path)
