"""Valid viewpoint-pair sampling.

A viewpoint is valid when (1) the camera position keeps a clearance radius
from all geometry, (2) a low-res probe render sees at least 80% geometry.
The previous viewpoint additionally stays within d_max of the current one,
with an unoccluded segment between the two positions, and a slightly
perturbed view direction.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Camera, Scene
from .render import occluded, render_coverage

MIN_COVERAGE = 0.80
CLEARANCE = 0.25
DMAX_FRACTION = 0.05  # of the scene bounding diagonal
MAX_ROTATION = math.radians(12.0)
PITCH_RANGE = (math.radians(-70.0), math.radians(-8.0))
DEFAULT_BUDGET = 10000
PROBE_RES = 24


class SamplingBudgetExhausted(RuntimeError):
    pass


def _random_direction(rng) -> np.ndarray:
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    pitch = rng.uniform(*PITCH_RANGE)
    cp = math.cos(pitch)
    return np.array([cp * math.cos(yaw), math.sin(pitch), cp * math.sin(yaw)])


def _perturb_direction(rng, d: np.ndarray) -> np.ndarray:
    axis = rng.normal(size=3)
    axis -= axis.dot(d) * d
    n = np.linalg.norm(axis)
    if n < 1e-9:
        return d.copy()
    axis /= n
    ang = rng.uniform(0.0, MAX_ROTATION)
    out = d * math.cos(ang) + axis * math.sin(ang)
    return out / np.linalg.norm(out)


def _valid_position(scene: Scene, pos: np.ndarray) -> bool:
    lo, hi = scene.camera_region
    if np.any(pos < lo) or np.any(pos > hi):
        return False
    return scene.clearance(pos) > CLEARANCE


def _valid_viewpoint(scene: Scene, cam: Camera) -> bool:
    return render_coverage(scene, cam, PROBE_RES) >= MIN_COVERAGE


def sample_viewpoint_pair(scene: Scene, rng, budget: int = DEFAULT_BUDGET):
    """Rejection-samples (previous, current) cameras; deterministic per rng."""
    lo, hi = scene.camera_region
    d_max = DMAX_FRACTION * scene.bounding_diagonal()
    attempts = 0
    current = None
    while attempts < budget:
        attempts += 1
        pos = rng.uniform(lo, hi)
        if not _valid_position(scene, pos):
            continue
        cam = Camera(position=pos, forward=_random_direction(rng))
        if _valid_viewpoint(scene, cam):
            current = cam
            break
    if current is None:
        raise SamplingBudgetExhausted(
            f"no valid viewpoint in {budget} attempts; scene/region unsuitable")
    while attempts < budget:
        attempts += 1
        offset = rng.normal(size=3)
        offset /= np.linalg.norm(offset)
        offset *= d_max * rng.uniform(0.0, 1.0) ** (1.0 / 3.0)
        pos = current.position + offset
        if not _valid_position(scene, pos):
            continue
        seg = current.position - pos
        dist = float(np.linalg.norm(seg))
        if dist > 1e-9 and occluded(scene, pos[None, :], (seg / dist)[None, :],
                                    tmax=dist - 1e-4)[0]:
            continue
        prev = Camera(position=pos, forward=_perturb_direction(rng, current.forward))
        if _valid_viewpoint(scene, prev):
            return prev, current
    raise SamplingBudgetExhausted(
        f"no valid previous viewpoint in {budget} attempts")
