"""JIT ray-intersection kernels mirroring the numpy path in render.py.

fastmath stays off so results are bit-identical to the numpy expressions;
each ray owns its output slot, so parallel runs are reproducible.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("VRSNET_NO_NUMBA", "") != "1"
if USE_NUMBA:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap if not (args and callable(args[0])) else args[0]

    prange = range

KIND_NONE = -1
KIND_PLANE = 0
KIND_SPHERE = 1
KIND_BOX = 2


@njit(inline="always")
def _box_hit(o0, o1, o2, d0, d1, d2, bmin, bmax, bi, tmin):
    tn = -np.inf
    tf = np.inf
    for ax in range(3):
        if ax == 0:
            o = o0; d = d0
        elif ax == 1:
            o = o1; d = d1
        else:
            o = o2; d = d2
        if d == 0.0:
            if o < bmin[bi, ax] or o > bmax[bi, ax]:
                return np.inf
        else:
            ta = (bmin[bi, ax] - o) / d
            tb = (bmax[bi, ax] - o) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > tn:
                tn = ta
            if tb < tf:
                tf = tb
    if tn > tf:
        return np.inf
    return tn if tn > tmin else tf


@njit(parallel=True, cache=True)
def _intersect_rays(ox, oy, oz, dx, dy, dz, has_plane, sc, sr, bmin, bmax,
                    tmin, tmax, out_t, out_kind, out_index):
    m = ox.shape[0]
    for i in prange(m):
        best = np.inf
        kind = KIND_NONE
        index = 0
        o0 = ox[i]; o1 = oy[i]; o2 = oz[i]
        d0 = dx[i]; d1 = dy[i]; d2 = dz[i]
        if has_plane and d1 != 0.0:
            t = -o1 / d1
            if tmin < t < best and t < tmax:
                best = t
                kind = KIND_PLANE
        for s in range(sc.shape[0]):
            c0 = o0 - sc[s, 0]; c1 = o1 - sc[s, 1]; c2 = o2 - sc[s, 2]
            b = c0 * d0 + c1 * d1 + c2 * d2
            disc = b * b - (c0 * c0 + c1 * c1 + c2 * c2 - sr[s] * sr[s])
            if disc >= 0.0:
                sq = np.sqrt(disc)
                t = -b - sq
                if t <= tmin:
                    t = -b + sq
                if tmin < t < best and t < tmax:
                    best = t
                    kind = KIND_SPHERE
                    index = s
        for bi in range(bmin.shape[0]):
            t = _box_hit(o0, o1, o2, d0, d1, d2, bmin, bmax, bi, tmin)
            if tmin < t < best and t < tmax:
                best = t
                kind = KIND_BOX
                index = bi
        out_t[i] = best
        out_kind[i] = kind
        out_index[i] = index


@njit(parallel=True, cache=True)
def _anyhit_rays(ox, oy, oz, dx, dy, dz, has_plane, sc, sr, bmin, bmax,
                 tmin, tmax, out_hit):
    m = ox.shape[0]
    for i in prange(m):
        o0 = ox[i]; o1 = oy[i]; o2 = oz[i]
        d0 = dx[i]; d1 = dy[i]; d2 = dz[i]
        hit = False
        if has_plane and d1 != 0.0:
            t = -o1 / d1
            if tmin < t < tmax:
                hit = True
        if not hit:
            for s in range(sc.shape[0]):
                c0 = o0 - sc[s, 0]; c1 = o1 - sc[s, 1]; c2 = o2 - sc[s, 2]
                b = c0 * d0 + c1 * d1 + c2 * d2
                disc = b * b - (c0 * c0 + c1 * c1 + c2 * c2 - sr[s] * sr[s])
                if disc >= 0.0:
                    sq = np.sqrt(disc)
                    t = -b - sq
                    if t <= tmin:
                        t = -b + sq
                    if tmin < t < tmax:
                        hit = True
                        break
        if not hit:
            for bi in range(bmin.shape[0]):
                t = _box_hit(o0, o1, o2, d0, d1, d2, bmin, bmax, bi, tmin)
                if tmin < t < tmax:
                    hit = True
                    break
        out_hit[i] = hit


def _flat(origins, dirs):
    o = np.ascontiguousarray(origins, dtype=np.float64)
    d = np.ascontiguousarray(dirs, dtype=np.float64)
    return o[:, 0], o[:, 1], o[:, 2], d[:, 0], d[:, 1], d[:, 2]


def intersect_fast(scene, origins, dirs, tmin, tmax):
    m = dirs.shape[0]
    out_t = np.full(m, np.inf)
    out_kind = np.full(m, KIND_NONE, dtype=np.int8)
    out_index = np.zeros(m, dtype=np.int32)
    _intersect_rays(*_flat(origins, dirs), scene.has_plane, scene.sphere_center,
                    scene.sphere_radius, scene.box_min, scene.box_max,
                    float(tmin), float(tmax), out_t, out_kind, out_index)
    return out_t, out_kind, out_index


def occluded_fast(scene, origins, dirs, tmin, tmax):
    m = dirs.shape[0]
    out_hit = np.zeros(m, dtype=np.bool_)
    _anyhit_rays(*_flat(origins, dirs), scene.has_plane, scene.sphere_center,
                 scene.sphere_radius, scene.box_min, scene.box_max,
                 float(tmin), float(tmax), out_hit)
    return out_hit
