"""Shading rates: a rate u x v shades one sample per u-wide, v-tall pixel block."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=False)
class ShadingRate:
    """Horizontal stride u and vertical stride v, each in {1, 2, 4}."""

    u: int
    v: int

    def __post_init__(self):
        if self.u not in (1, 2, 4) or self.v not in (1, 2, 4):
            raise ValueError(f"unsupported shading rate {self.u}x{self.v}")
        if (self.u, self.v) == (4, 1) or (self.u, self.v) == (1, 4):
            raise ValueError(f"unsupported shading rate {self.u}x{self.v}")

    def __str__(self):
        return f"{self.u}x{self.v}"

    @property
    def cost_rank(self) -> int:
        """Position in COST_ORDER; lower = cheaper (fewer shading invocations)."""
        return COST_ORDER.index(self)

    @classmethod
    def parse(cls, text: str) -> "ShadingRate":
        u, _, v = text.lower().partition("x")
        return cls(int(u), int(v))


RATE_1X1 = ShadingRate(1, 1)
RATE_1X2 = ShadingRate(1, 2)
RATE_2X1 = ShadingRate(2, 1)
RATE_2X2 = ShadingRate(2, 2)
RATE_2X4 = ShadingRate(2, 4)
RATE_4X2 = ShadingRate(4, 2)
RATE_4X4 = ShadingRate(4, 4)

# Increasing computational cost. Ties (equal shading-op count) are broken by a
# fixed convention (4x2 before 2x4, 2x1 before 1x2) so selection is deterministic.
COST_ORDER = (RATE_4X4, RATE_4X2, RATE_2X4, RATE_2X2, RATE_2X1, RATE_1X2, RATE_1X1)

# All reduced rates a prediction table must cover; 1x1 is implicitly error 0.
REDUCED_RATES = (RATE_1X2, RATE_2X1, RATE_2X2, RATE_2X4, RATE_4X2, RATE_4X4)

# Recommended network output channels; the rest are extrapolated.
PREDICTED_RATES = (RATE_1X2, RATE_2X1, RATE_2X4, RATE_4X2)


def parse_rate_list(text: str) -> tuple[ShadingRate, ...]:
    return tuple(ShadingRate.parse(part) for part in text.split(",") if part)


def format_rate_list(rates) -> str:
    return ",".join(str(r) for r in rates)
