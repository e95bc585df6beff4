"""Temporal reprojection of the previous frame's shaded color into the
current view, with a binary validity mask (seen = 1, unseen = 0)."""

from __future__ import annotations

import math

import numpy as np

from .render import GBufferFrame

DEPTH_TOLERANCE = 0.01  # relative


def reproject(prev_gbuffer: GBufferFrame, prev_image: np.ndarray,
              cur_gbuffer: GBufferFrame, depth_tolerance: float = DEPTH_TOLERANCE):
    """Returns (color (3, H, W), mask (H, W)).

    Each current geometry pixel's world position is projected into the
    previous camera; the sample is accepted when it lands inside the previous
    frustum and the previous depth there matches the transformed depth within
    the relative tolerance. Rejected and sky pixels get mask 0, color 0.
    """
    cam = prev_gbuffer.camera
    h, w = cur_gbuffer.shape
    if prev_gbuffer.shape != (h, w):
        raise ValueError("frame resolutions differ")
    mask = np.zeros((h, w), np.float32)
    color = np.zeros((3, h, w), np.float32)

    geo = ~cur_gbuffer.sky
    wp = cur_gbuffer.world_pos[:, geo].astype(np.float64).T  # (M, 3)
    rel = wp - cam.position
    basis = cam.basis()
    vx = rel @ basis[0]
    vy = rel @ basis[1]
    vz = rel @ basis[2]

    tan_v = math.tan(cam.vfov / 2)
    tan_h = tan_v * w / h
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = vx / (vz * tan_h)
        ndc_y = vy / (vz * tan_v)
    inside = (vz >= cam.near) & (vz <= cam.far) & (np.abs(ndc_x) <= 1.0) \
        & (np.abs(ndc_y) <= 1.0)

    px = np.clip(np.rint((ndc_x + 1.0) * 0.5 * w - 0.5).astype(np.int64), 0, w - 1)
    py = np.clip(np.rint((1.0 - ndc_y) * 0.5 * h - 0.5).astype(np.int64), 0, h - 1)
    prev_z = prev_gbuffer.depth.astype(np.float64)[py, px]
    match = inside & (np.abs(vz - prev_z) <= depth_tolerance * prev_z)

    m = np.zeros(geo.sum(), np.float32)
    m[match] = 1.0
    mask[geo] = m
    samp = np.zeros((3, geo.sum()), np.float32)
    samp[:, match] = prev_image[:, py[match], px[match]]
    color[:, geo] = samp
    return color, mask
