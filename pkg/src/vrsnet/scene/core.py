"""Analytic scenes: a ground plane, spheres, and axis-aligned boxes with
procedural materials, one directional light, and a camera sampling region.

Four fixed procedural scenes are bundled (diffuse, specular, checker, mixed);
each is fully determined by its recipe and built-in seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALBEDO_SOLID = 0
ALBEDO_CHECKER = 1
ALBEDO_NOISE = 2

SCENE_SEEDS = {"diffuse": 101, "specular": 202, "checker": 303, "mixed": 404}


@dataclass
class Material:
    kind: int = ALBEDO_SOLID
    color_a: tuple = (0.7, 0.7, 0.7)
    color_b: tuple = (0.2, 0.2, 0.2)
    scale: float = 1.0  # checker cell / noise frequency
    specular: float = 0.04
    roughness: float = 0.6
    emissive: float = 0.0


@dataclass
class Camera:
    position: np.ndarray
    forward: np.ndarray
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    vfov: float = math.radians(55.0)
    near: float = 0.05
    far: float = 60.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        f = np.asarray(self.forward, dtype=np.float64)
        n = np.linalg.norm(f)
        if n == 0:
            raise ValueError("degenerate forward vector")
        self.forward = f / n
        upw = np.asarray(self.up, dtype=np.float64)
        right = np.cross(self.forward, upw)
        rn = np.linalg.norm(right)
        if rn < 1e-8:  # looking straight along up; pick another hint
            right = np.cross(self.forward, np.array([1.0, 0.0, 0.0]))
            rn = np.linalg.norm(right)
        self.right = right / rn
        self.up = np.cross(self.right, self.forward)
        if not (0 < self.near < self.far):
            raise ValueError("need far > near > 0")

    def basis(self) -> np.ndarray:
        """Rows (right, up, forward): world -> view rotation."""
        return np.stack([self.right, self.up, self.forward])

    def meta_lines(self, prefix: str) -> list:
        return [f"{prefix}_position={_fmt_vec(self.position)}",
                f"{prefix}_forward={_fmt_vec(self.forward)}",
                f"{prefix}_up={_fmt_vec(self.up)}",
                f"{prefix}_vfov={self.vfov!r}",
                f"{prefix}_near={self.near!r}",
                f"{prefix}_far={self.far!r}"]

    @classmethod
    def from_meta(cls, meta: dict, prefix: str) -> "Camera":
        return cls(position=_parse_vec(meta[f"{prefix}_position"]),
                   forward=_parse_vec(meta[f"{prefix}_forward"]),
                   up=_parse_vec(meta[f"{prefix}_up"]),
                   vfov=float(meta[f"{prefix}_vfov"]),
                   near=float(meta[f"{prefix}_near"]),
                   far=float(meta[f"{prefix}_far"]))


def _fmt_vec(v) -> str:
    return ",".join(repr(float(x)) for x in v)


def _parse_vec(s: str) -> np.ndarray:
    return np.array([float(x) for x in s.split(",")])


@dataclass
class Scene:
    name: str
    seed: int
    materials: list
    sphere_center: np.ndarray  # (S, 3)
    sphere_radius: np.ndarray  # (S,)
    sphere_mat: np.ndarray  # (S,) int
    box_min: np.ndarray  # (B, 3)
    box_max: np.ndarray  # (B, 3)
    box_mat: np.ndarray  # (B,) int
    has_plane: bool = True
    plane_mat: int = 0
    light_dir: np.ndarray = field(
        default_factory=lambda: np.array([0.45, 1.0, 0.3]))  # toward the light
    light_color: np.ndarray = field(
        default_factory=lambda: np.array([2.2, 2.1, 1.9]))
    sky_color: np.ndarray = field(
        default_factory=lambda: np.array([0.45, 0.62, 0.85]))
    camera_region: tuple = (np.array([-5.0, 1.1, -5.0]), np.array([5.0, 3.6, 5.0]))

    def __post_init__(self):
        self.light_dir = np.asarray(self.light_dir, dtype=np.float64)
        self.light_dir = self.light_dir / np.linalg.norm(self.light_dir)
        self.light_color = np.asarray(self.light_color, dtype=np.float64)
        self.sky_color = np.asarray(self.sky_color, dtype=np.float64)
        # per-material SoA for vectorized evaluation
        self.mat_kind = np.array([m.kind for m in self.materials])
        self.mat_color_a = np.array([m.color_a for m in self.materials])
        self.mat_color_b = np.array([m.color_b for m in self.materials])
        self.mat_scale = np.array([m.scale for m in self.materials])
        self.mat_specular = np.array([m.specular for m in self.materials])
        self.mat_roughness = np.array([m.roughness for m in self.materials])
        self.mat_emissive = np.array([m.emissive for m in self.materials])

    def bounds(self) -> tuple:
        """Union of finite geometry and the camera region."""
        lo = [self.camera_region[0]]
        hi = [self.camera_region[1]]
        if len(self.sphere_center):
            lo.append((self.sphere_center - self.sphere_radius[:, None]).min(axis=0))
            hi.append((self.sphere_center + self.sphere_radius[:, None]).max(axis=0))
        if len(self.box_min):
            lo.append(self.box_min.min(axis=0))
            hi.append(self.box_max.max(axis=0))
        lo = np.min(lo, axis=0)
        hi = np.max(hi, axis=0)
        if self.has_plane:
            lo[1] = min(lo[1], 0.0)
        return lo, hi

    def bounding_diagonal(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def clearance(self, point: np.ndarray) -> float:
        """Distance from a point to the nearest primitive surface."""
        d = np.inf
        if self.has_plane:
            d = min(d, float(point[1]))
        if len(self.sphere_center):
            d = min(d, float((np.linalg.norm(self.sphere_center - point, axis=1)
                              - self.sphere_radius).min()))
        if len(self.box_min):
            q = np.maximum(self.box_min - point, 0) + np.maximum(point - self.box_max, 0)
            d = min(d, float(np.linalg.norm(q, axis=1).min()))
        return d


def _value_noise3(p: np.ndarray) -> np.ndarray:
    """Deterministic 3D value noise in [0,1); p is (..., 3)."""
    pi = np.floor(p).astype(np.int64)
    pf = p - pi

    def hash01(ix, iy, iz):
        h = (ix * np.int64(374761393) + iy * np.int64(668265263)
             + iz * np.int64(2147483647)).astype(np.uint64)
        h ^= h >> np.uint64(13)
        h = h * np.uint64(1274126177)
        h ^= h >> np.uint64(16)
        return (h & np.uint64(0xFFFFFF)).astype(np.float64) / float(0x1000000)

    s = pf * pf * (3.0 - 2.0 * pf)  # smoothstep
    acc = np.zeros(p.shape[:-1])
    for dx in (0, 1):
        wx = s[..., 0] if dx else 1.0 - s[..., 0]
        for dy in (0, 1):
            wy = s[..., 1] if dy else 1.0 - s[..., 1]
            for dz in (0, 1):
                wz = s[..., 2] if dz else 1.0 - s[..., 2]
                acc += wx * wy * wz * hash01(pi[..., 0] + dx, pi[..., 1] + dy,
                                             pi[..., 2] + dz)
    return acc


def evaluate_albedo(scene: Scene, mat_idx: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Albedo in [0,1]^3 for hit points (M, 3) with material indices (M,)."""
    kind = scene.mat_kind[mat_idx]
    ca = scene.mat_color_a[mat_idx]
    cb = scene.mat_color_b[mat_idx]
    scale = scene.mat_scale[mat_idx][:, None]
    out = ca.copy()
    chk = kind == ALBEDO_CHECKER
    if np.any(chk):
        cells = np.floor(points[chk] * scale[chk]).sum(axis=1).astype(np.int64)
        odd = (cells & 1) == 1
        out[chk] = np.where(odd[:, None], cb[chk], ca[chk])
    noi = kind == ALBEDO_NOISE
    if np.any(noi):
        t = _value_noise3(points[noi] * scale[noi])[:, None]
        out[noi] = ca[noi] * (1.0 - t) + cb[noi] * t
    return np.clip(out, 0.0, 1.0)


def _scene_recipe(name: str, rng, flavor: dict) -> Scene:
    mats = [flavor["plane_mat"]]
    spheres, boxes = [], []
    n_spheres = flavor.get("spheres", 7)
    n_boxes = flavor.get("boxes", 3)
    for i in range(n_spheres):
        r = rng.uniform(0.45, 1.25)
        pos = np.array([rng.uniform(-4.5, 4.5), r, rng.uniform(-4.5, 4.5)])
        mats.append(flavor["object_mat"](rng, i))
        spheres.append((pos, r, len(mats) - 1))
    for i in range(n_boxes):
        sx, sy, sz = rng.uniform(0.5, 1.3), rng.uniform(0.6, 2.2), rng.uniform(0.5, 1.3)
        cx, cz = rng.uniform(-4.5, 4.5), rng.uniform(-4.5, 4.5)
        mats.append(flavor["object_mat"](rng, n_spheres + i))
        boxes.append((np.array([cx - sx, 0.0, cz - sz]),
                      np.array([cx + sx, 2 * sy, cz + sz]), len(mats) - 1))
    return Scene(
        name=name, seed=flavor["seed"], materials=mats,
        sphere_center=np.array([s[0] for s in spheres]),
        sphere_radius=np.array([s[1] for s in spheres]),
        sphere_mat=np.array([s[2] for s in spheres]),
        box_min=np.array([b[0] for b in boxes]) if boxes else np.zeros((0, 3)),
        box_max=np.array([b[1] for b in boxes]) if boxes else np.zeros((0, 3)),
        box_mat=np.array([b[2] for b in boxes], dtype=np.int64)
        if boxes else np.zeros(0, dtype=np.int64),
        plane_mat=0)


def _pick_color(rng, lo=0.15, hi=0.9):
    return tuple(rng.uniform(lo, hi, size=3))


def build_scene(name: str) -> Scene:
    """One of the four bundled procedural scenes."""
    if name not in SCENE_SEEDS:
        raise ValueError(f"unknown scene {name!r}; choose from {sorted(SCENE_SEEDS)}")
    seed = SCENE_SEEDS[name]
    rng = np.random.default_rng(seed)
    if name == "diffuse":
        flavor = {
            "seed": seed,
            "plane_mat": Material(ALBEDO_NOISE, (0.55, 0.5, 0.42), (0.3, 0.33, 0.3),
                                  scale=0.35, specular=0.02, roughness=0.85),
            "object_mat": lambda r, i: Material(
                ALBEDO_NOISE if i % 3 == 0 else ALBEDO_SOLID,
                _pick_color(r), _pick_color(r), scale=r.uniform(0.6, 1.6),
                specular=r.uniform(0.01, 0.06), roughness=r.uniform(0.55, 0.95)),
            "spheres": 7, "boxes": 3,
        }
    elif name == "specular":
        flavor = {
            "seed": seed,
            "plane_mat": Material(ALBEDO_SOLID, (0.32, 0.32, 0.36),
                                  specular=0.5, roughness=0.12),
            "object_mat": lambda r, i: Material(
                ALBEDO_SOLID, _pick_color(r, 0.1, 0.55), _pick_color(r),
                specular=r.uniform(0.55, 0.95), roughness=r.uniform(0.05, 0.18)),
            "spheres": 8, "boxes": 2,
        }
    elif name == "checker":
        flavor = {
            "seed": seed,
            "plane_mat": Material(ALBEDO_CHECKER, (0.82, 0.8, 0.78), (0.15, 0.15, 0.18),
                                  scale=0.9, specular=0.05, roughness=0.7),
            "object_mat": lambda r, i: Material(
                ALBEDO_CHECKER, _pick_color(r, 0.5, 0.95), _pick_color(r, 0.05, 0.3),
                scale=r.uniform(1.5, 3.5), specular=r.uniform(0.03, 0.1),
                roughness=r.uniform(0.4, 0.8)),
            "spheres": 7, "boxes": 3,
        }
    else:  # mixed
        def object_mat(r, i):
            pick = i % 4
            if pick == 0:
                return Material(ALBEDO_CHECKER, _pick_color(r, 0.5, 0.95),
                                _pick_color(r, 0.05, 0.3), scale=r.uniform(1.5, 3.0),
                                specular=r.uniform(0.03, 0.1), roughness=r.uniform(0.4, 0.8))
            if pick == 1:
                return Material(ALBEDO_SOLID, _pick_color(r, 0.1, 0.5), _pick_color(r),
                                specular=r.uniform(0.5, 0.9), roughness=r.uniform(0.06, 0.2))
            if pick == 2:
                return Material(ALBEDO_NOISE, _pick_color(r), _pick_color(r),
                                scale=r.uniform(0.7, 1.8),
                                specular=r.uniform(0.02, 0.08), roughness=r.uniform(0.5, 0.9),
                                emissive=0.25 if i == 6 else 0.0)
            return Material(ALBEDO_SOLID, _pick_color(r), _pick_color(r),
                            specular=r.uniform(0.05, 0.2), roughness=r.uniform(0.3, 0.6))

        flavor = {
            "seed": seed,
            "plane_mat": Material(ALBEDO_CHECKER, (0.62, 0.6, 0.56), (0.22, 0.24, 0.28),
                                  scale=0.8, specular=0.06, roughness=0.5),
            "object_mat": object_mat,
            "spheres": 8, "boxes": 3,
        }
    return _scene_recipe(name, rng, flavor)
