"""Deferred rendering against the analytic scenes: G-buffer fill from one
primary ray per pixel center, binary shadow rays, and block-replicated
shading at any supported shading rate with Reinhard tone mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rates import ShadingRate
from . import fastgeom
from .core import Camera, Scene, evaluate_albedo

SHADOW_EPS = 1e-3

KIND_NONE = -1
KIND_PLANE = 0
KIND_SPHERE = 1
KIND_BOX = 2


@dataclass
class GBufferFrame:
    depth: np.ndarray            # (H, W) view-space depth; far where sky
    normal_view: np.ndarray      # (3, H, W) view-space unit normals, 0 on sky
    diffuse: np.ndarray          # (3, H, W) albedo
    specular: np.ndarray         # (H, W)
    roughness: np.ndarray        # (H, W)
    shadow: np.ndarray           # (H, W) 1 lit, 0 shadowed
    emissive: np.ndarray         # (H, W)
    world_pos: np.ndarray        # (3, H, W), 0 on sky
    sky: np.ndarray              # (H, W) bool
    camera: Camera

    @property
    def shape(self):
        return self.depth.shape

    def coverage(self) -> float:
        """Fraction of pixels hitting geometry."""
        return float(1.0 - self.sky.mean())


def camera_rays(camera: Camera, width: int, height: int):
    """Unit ray directions through every pixel center, (H*W, 3)."""
    tan_v = math.tan(camera.vfov / 2)
    tan_h = tan_v * width / height
    xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * tan_h
    ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * tan_v
    gx, gy = np.meshgrid(xs, ys)
    d = (camera.forward[None, :] + gx.reshape(-1, 1) * camera.right[None, :]
         + gy.reshape(-1, 1) * camera.up[None, :])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def intersect(scene: Scene, origins: np.ndarray, dirs: np.ndarray,
              tmin: float = 1e-6, tmax: float = np.inf):
    """Nearest hit per ray. Returns (t, kind, index); kind = -1 means miss."""
    if fastgeom.USE_NUMBA:
        return fastgeom.intersect_fast(scene, origins, dirs, tmin, tmax)
    return _intersect_np(scene, origins, dirs, tmin, tmax)


def _intersect_np(scene: Scene, origins: np.ndarray, dirs: np.ndarray,
                  tmin: float = 1e-6, tmax: float = np.inf):
    m = dirs.shape[0]
    best_t = np.full(m, np.inf)
    kind = np.full(m, KIND_NONE, dtype=np.int8)
    index = np.zeros(m, dtype=np.int32)
    ox, oy, oz = origins[:, 0], origins[:, 1], origins[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        if scene.has_plane:
            t = -oy / dirs[:, 1]
            ok = np.isfinite(t) & (t > tmin) & (t < best_t) & (t < tmax)
            best_t[ok] = t[ok]
            kind[ok] = KIND_PLANE
        for i in range(len(scene.sphere_center)):
            c = scene.sphere_center[i]
            r = scene.sphere_radius[i]
            oc = origins - c
            b = (oc * dirs).sum(axis=1)
            disc = b * b - ((oc * oc).sum(axis=1) - r * r)
            hit = disc >= 0
            sq = np.sqrt(np.where(hit, disc, 0.0))
            t0 = -b - sq
            t1 = -b + sq
            t = np.where(t0 > tmin, t0, t1)
            ok = hit & (t > tmin) & (t < best_t) & (t < tmax)
            best_t[ok] = t[ok]
            kind[ok] = KIND_SPHERE
            index[ok] = i
        for i in range(len(scene.box_min)):
            inv = 1.0 / dirs
            ta = (scene.box_min[i] - origins) * inv
            tb = (scene.box_max[i] - origins) * inv
            tn = np.minimum(ta, tb).max(axis=1)
            tf = np.maximum(ta, tb).min(axis=1)
            t = np.where(tn > tmin, tn, tf)
            ok = (tn <= tf) & (t > tmin) & (t < best_t) & (t < tmax)
            best_t[ok] = t[ok]
            kind[ok] = KIND_BOX
            index[ok] = i
    return best_t, kind, index


def occluded(scene: Scene, origins: np.ndarray, dirs: np.ndarray,
             tmax=np.inf) -> np.ndarray:
    if fastgeom.USE_NUMBA:
        return fastgeom.occluded_fast(scene, origins, dirs, SHADOW_EPS, tmax)
    t, kind, _ = _intersect_np(scene, origins, dirs, tmin=SHADOW_EPS, tmax=tmax)
    return kind != KIND_NONE


def _hit_normals(scene: Scene, kind, index, points, dirs):
    n = np.zeros_like(points)
    pl = kind == KIND_PLANE
    n[pl] = (0.0, 1.0, 0.0)
    sp = kind == KIND_SPHERE
    if np.any(sp):
        c = scene.sphere_center[index[sp]]
        r = scene.sphere_radius[index[sp]][:, None]
        n[sp] = (points[sp] - c) / r
    bx = kind == KIND_BOX
    if np.any(bx):
        mn = scene.box_min[index[bx]]
        mx = scene.box_max[index[bx]]
        center = (mn + mx) / 2
        half = (mx - mn) / 2
        local = (points[bx] - center) / half
        axis = np.abs(local).argmax(axis=1)
        nb = np.zeros_like(local)
        nb[np.arange(len(local)), axis] = np.sign(
            local[np.arange(len(local)), axis])
        n[bx] = nb
    # face the camera
    flip = (n * dirs).sum(axis=1) > 0
    n[flip] = -n[flip]
    return n


def _material_index(scene: Scene, kind, index):
    mat = np.zeros(kind.shape, dtype=np.int64)
    mat[kind == KIND_PLANE] = scene.plane_mat
    sp = kind == KIND_SPHERE
    mat[sp] = scene.sphere_mat[index[sp]]
    bx = kind == KIND_BOX
    mat[bx] = scene.box_mat[index[bx]]
    return mat


def render_gbuffer(scene: Scene, camera: Camera, width: int, height: int) -> GBufferFrame:
    dirs = camera_rays(camera, width, height)
    origins = np.broadcast_to(camera.position, dirs.shape)
    t, kind, index = intersect(scene, origins, dirs, tmin=camera.near)
    hit = kind != KIND_NONE
    depth_ray = np.where(hit, t, np.inf)
    view_z = depth_ray * (dirs @ camera.forward)
    beyond = view_z > camera.far
    hit = hit & ~beyond

    points = np.zeros_like(dirs)
    points[hit] = camera.position + dirs[hit] * t[hit, None]
    normals = np.zeros_like(dirs)
    normals[hit] = _hit_normals(scene, kind[hit], index[hit], points[hit], dirs[hit])
    mat = _material_index(scene, kind, index)

    albedo = np.zeros_like(dirs)
    spec = np.zeros(len(dirs))
    rough = np.zeros(len(dirs))
    emis = np.zeros(len(dirs))
    if np.any(hit):
        albedo[hit] = evaluate_albedo(scene, mat[hit], points[hit])
        spec[hit] = scene.mat_specular[mat[hit]]
        rough[hit] = scene.mat_roughness[mat[hit]]
        emis[hit] = scene.mat_emissive[mat[hit]]

    shadow = np.ones(len(dirs))
    if np.any(hit):
        so = points[hit] + normals[hit] * SHADOW_EPS
        sd = np.broadcast_to(scene.light_dir, so.shape)
        shadow_hit = occluded(scene, so, sd)
        sh = np.ones(hit.sum())
        sh[shadow_hit] = 0.0
        shadow[hit] = sh

    basis = camera.basis()
    nv = np.zeros_like(dirs)
    nv[hit] = normals[hit] @ basis.T

    hw = (height, width)
    depth = np.where(hit, view_z, camera.far).reshape(hw)
    return GBufferFrame(
        depth=depth.astype(np.float32),
        normal_view=nv.T.reshape(3, *hw).astype(np.float32),
        diffuse=albedo.T.reshape(3, *hw).astype(np.float32),
        specular=spec.reshape(hw).astype(np.float32),
        roughness=rough.reshape(hw).astype(np.float32),
        shadow=shadow.reshape(hw).astype(np.float32),
        emissive=emis.reshape(hw).astype(np.float32),
        world_pos=points.T.reshape(3, *hw).astype(np.float32),
        sky=~hit.reshape(hw),
        camera=camera)


def render_coverage(scene: Scene, camera: Camera, res: int = 24) -> float:
    """Cheap geometry-coverage probe used by viewpoint validation."""
    dirs = camera_rays(camera, res, res)
    origins = np.broadcast_to(camera.position, dirs.shape)
    t, kind, _ = intersect(scene, origins, dirs, tmin=camera.near)
    view_z = t * (dirs @ camera.forward)
    hit = (kind != KIND_NONE) & (view_z <= camera.far)
    return float(hit.mean())


def _shade_samples(scene: Scene, camera: Camera, normal_view, diffuse, specular,
                   roughness, shadow, emissive, world_pos, sky):
    """Shading of flat sample arrays; returns tone-mapped RGB (M, 3)."""
    basis = camera.basis()
    n = normal_view.T @ basis  # view -> world (orthonormal)
    p = world_pos.T
    ldir = scene.light_dir
    v = camera.position - p
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
    h = ldir + v
    h /= np.maximum(np.linalg.norm(h, axis=1, keepdims=True), 1e-12)
    ndl = np.maximum((n * ldir).sum(axis=1), 0.0)
    ndh = np.maximum((n * h).sum(axis=1), 0.0)
    shininess = np.maximum(2.0 / (roughness * roughness + 1e-3) - 2.0, 1.0)
    lit = shadow * ndl
    glint = shadow * specular * np.power(ndh, shininess)
    color = (diffuse.T * lit[:, None] + glint[:, None]) * scene.light_color
    color += emissive[:, None] * diffuse.T
    color = color / (1.0 + color)  # Reinhard
    color = np.clip(color, 0.0, 1.0)
    color[sky] = scene.sky_color
    return color


def shade(gbuffer: GBufferFrame, rate: ShadingRate, scene: Scene) -> np.ndarray:
    """Shade at rate u x v: one evaluation per u-wide, v-tall block at the
    block-center G-buffer sample, replicated across the block. Sky pixels get
    the fixed background color at every rate. Returns (3, H, W) in [0,1]."""
    h, w = gbuffer.shape
    u, v = rate.u, rate.v
    if h % v or w % u:
        raise ValueError(f"resolution {w}x{h} not divisible by rate {rate}")
    cy = slice(v // 2, None, v)
    cx = slice(u // 2, None, u)

    def grid(plane):
        return plane[..., cy, cx]

    gh, gw = h // v, w // u
    color = _shade_samples(
        scene, gbuffer.camera,
        grid(gbuffer.normal_view).reshape(3, -1),
        grid(gbuffer.diffuse).reshape(3, -1),
        grid(gbuffer.specular).reshape(-1),
        grid(gbuffer.roughness).reshape(-1),
        grid(gbuffer.shadow).reshape(-1),
        grid(gbuffer.emissive).reshape(-1),
        grid(gbuffer.world_pos).reshape(3, -1),
        grid(gbuffer.sky).reshape(-1))
    img = color.T.reshape(3, gh, gw)
    img = np.repeat(np.repeat(img, v, axis=1), u, axis=2)
    img[:, gbuffer.sky] = scene.sky_color[:, None]
    return img.astype(np.float32)
