"""Point cloud loading, synthesis, and rigid yaw transforms.

Clouds are stored as dense numpy arrays (one row per return) so the
encoders can stay fully vectorized. All functions here are pure: they
never mutate their inputs and are safe to call from multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KITTI_RECORD_BYTES = 16  # four little-endian float32: x, y, z, intensity


@dataclass(frozen=True)
class Point:
    """A single LiDAR return in the sensor frame (z up), intensity in [0, 1]."""

    x: float
    y: float
    z: float
    intensity: float


@dataclass
class PointCloud:
    """An ordered set of returns for one scan.

    Ordering carries no meaning; every downstream encoding is required to
    be independent of it.
    """

    frame_id: str
    xyz: np.ndarray        # (N, 3) float64
    intensity: np.ndarray  # (N,) float64, values in [0, 1]

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
        if self.xyz.shape[0] != self.intensity.shape[0]:
            raise ValueError("xyz and intensity row counts differ")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def point(self, i: int) -> Point:
        return Point(*self.xyz[i], self.intensity[i])

    @staticmethod
    def empty(frame_id: str = "") -> "PointCloud":
        return PointCloud(frame_id, np.zeros((0, 3)), np.zeros(0))


@dataclass(frozen=True)
class FrameMeta:
    """Capture metadata: map-frame position (east, north) in meters."""

    frame_id: str
    east: float
    north: float
    yaw: float | None = None

    @property
    def position(self) -> np.ndarray:
        return np.array([self.east, self.north], dtype=np.float64)


def load_kitti_bin(path, frame_id: str = "", intensity_scale: float = 1.0) -> PointCloud:
    """Decode a packed float32 x/y/z/intensity scan file.

    ``intensity_scale`` divides raw intensities before clamping; pass 255.0
    for sources that store reflectance as 0-255 counts.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) % KITTI_RECORD_BYTES != 0:
        raise ValueError(
            f"scan file {path!s} has {len(raw)} bytes, "
            f"not a multiple of {KITTI_RECORD_BYTES}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    intensity = np.clip(data[:, 3] / float(intensity_scale), 0.0, 1.0)
    return PointCloud(frame_id or str(path), data[:, :3].copy(), intensity)


def save_kitti_bin(cloud: PointCloud, path) -> None:
    """Write a cloud in the packed float32 layout read by load_kitti_bin."""
    rec = np.empty((len(cloud), 4), dtype="<f4")
    rec[:, :3] = cloud.xyz
    rec[:, 3] = cloud.intensity
    with open(path, "wb") as f:
        f.write(rec.tobytes())


def apply_yaw(cloud: PointCloud, theta: float) -> PointCloud:
    """Rotate every point about the z axis by ``theta`` radians.

    Intensity and z are untouched; point order is preserved.
    """
    if not math.isfinite(theta):
        raise ValueError("yaw angle must be finite")
    c, s = math.cos(theta), math.sin(theta)
    x, y = cloud.xyz[:, 0], cloud.xyz[:, 1]
    out = np.empty_like(cloud.xyz)
    out[:, 0] = x * c - y * s
    out[:, 1] = x * s + y * c
    out[:, 2] = cloud.xyz[:, 2]
    return PointCloud(cloud.frame_id, out, cloud.intensity.copy())


# --- synthetic worlds -------------------------------------------------------

@dataclass(frozen=True)
class Plane:
    """Horizontal plane z = height, unbounded."""

    height: float
    reflectance: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned box."""

    center: tuple  # (x, y, z)
    size: tuple    # (sx, sy, sz) full extents
    reflectance: float


@dataclass(frozen=True)
class Pole:
    """Vertical cylinder from z=0 to z=height."""

    center: tuple  # (x, y)
    radius: float
    height: float
    reflectance: float


@dataclass
class SyntheticWorld:
    """A deterministic arrangement of primitives; regeneration from the
    same seed is bit-identical."""

    seed: int
    extent: float
    primitives: list = field(default_factory=list)

    def manifest(self) -> list:
        """Structural summary used for equality checks between worlds."""
        return [repr(p) for p in self.primitives]


def synth_world(seed: int, extent: float = 120.0, density: float = 5.0) -> SyntheticWorld:
    """Generate a world of ``density`` primitives per 100 m^2 on a square
    of side ``extent`` centered at the origin. Always includes a ground
    plane at z=0."""
    if extent <= 0:
        raise ValueError("extent must be positive")
    rng = np.random.default_rng([int(seed), 0x5EED])
    prims = [Plane(height=0.0, reflectance=0.2)]
    n = int(round(density * extent * extent / 100.0))
    half = extent / 2.0
    for _ in range(n):
        kind = rng.integers(0, 2)
        cx, cy = rng.uniform(-half, half, 2)
        refl = float(rng.uniform(0.1, 1.0))
        if kind == 0:
            sx, sy = rng.uniform(1.0, 6.0, 2)
            sz = float(rng.uniform(2.0, 10.0))
            prims.append(Box((float(cx), float(cy), sz / 2.0),
                             (float(sx), float(sy), sz), refl))
        else:
            prims.append(Pole((float(cx), float(cy)),
                              radius=float(rng.uniform(0.15, 0.8)),
                              height=float(rng.uniform(3.0, 12.0)),
                              reflectance=refl))
    return SyntheticWorld(seed=int(seed), extent=float(extent), primitives=prims)


def _intersect_plane(plane: Plane, origin, dirs):
    """Ray-plane hit distances; inf where the ray misses."""
    dz = dirs[:, 2]
    t = np.full(dirs.shape[0], np.inf)
    moving = dz != 0.0
    t_hit = (plane.height - origin[2]) / np.where(moving, dz, 1.0)
    valid = moving & (t_hit > 1e-9)
    t[valid] = t_hit[valid]
    return t


def _intersect_box(box: Box, origin, dirs):
    """Slab-test hit distances for an axis-aligned box; inf on miss."""
    lo = np.asarray(box.center) - np.asarray(box.size) / 2.0
    hi = np.asarray(box.center) + np.asarray(box.size) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo[None, :] - origin[None, :]) * inv
        t2 = (hi[None, :] - origin[None, :]) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=1)
    t = np.where((tmax >= tmin) & (tmax > 1e-9), np.maximum(tmin, 1e-9), np.inf)
    # ray starting inside the box exits at tmax
    inside = (tmin < 1e-9) & (tmax > 1e-9)
    t[inside] = tmax[inside]
    return t


def _intersect_pole(pole: Pole, origin, dirs):
    """Ray-cylinder hit distances (finite vertical cylinder); inf on miss."""
    ox, oy = origin[0] - pole.center[0], origin[1] - pole.center[1]
    dx, dy = dirs[:, 0], dirs[:, 1]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - pole.radius ** 2
    disc = b * b - 4.0 * a * c
    t = np.full(dirs.shape[0], np.inf)
    ok = (disc >= 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    for sign in (-1.0, 1.0):
        t_c = (-b + sign * sq) / np.where(ok, 2.0 * a, 1.0)
        z = origin[2] + t_c * dirs[:, 2]
        hit = ok & (t_c > 1e-9) & (z >= 0.0) & (z <= pole.height)
        t = np.where(hit & (t_c < t), t_c, t)
    return t


# fixed sampling phase (golden-ratio fraction): keeps ray angles off every
# rational grid-bin boundary, so encodings cannot flicker under the last-ulp
# coordinate noise of a rigid rotation
RAY_PHASE = 0.381966011250105


def render_scan(world: SyntheticWorld, pose: FrameMeta, beams: int = 16,
                azimuth_steps: int = 180, max_range: float = 80.0,
                fov_up: float = 10.0, fov_down: float = -30.0,
                sensor_height: float = 1.5) -> PointCloud:
    """Ray-cast a spinning-LiDAR scan of the world from ``pose``.

    One ray per (elevation, azimuth) pair, nearest hit wins; ties between
    coincident surfaces go to the primitive created first. Rays that hit
    nothing within ``max_range`` emit no point. Intensity is copied from
    the hit primitive's reflectance. Both angle grids carry the RAY_PHASE
    offset, so samples sit strictly inside projection bins.
    """
    if beams < 1 or azimuth_steps < 1 or max_range <= 0:
        raise ValueError("beams >= 1, azimuth_steps >= 1, max_range > 0 required")
    yaw = pose.yaw or 0.0
    if beams == 1:
        elevations = np.array([(fov_up + fov_down) / 2.0])
    else:
        span = fov_up - fov_down
        elevations = fov_up - span * (np.arange(beams) + RAY_PHASE) / beams
    elevations = np.deg2rad(elevations)
    azimuths = yaw + 2.0 * np.pi * (np.arange(azimuth_steps) + RAY_PHASE) / azimuth_steps

    el, az = np.meshgrid(elevations, azimuths, indexing="ij")
    el, az = el.ravel(), az.ravel()
    dirs = np.stack([np.cos(el) * np.cos(az),
                     np.cos(el) * np.sin(az),
                     np.sin(el)], axis=1)
    origin = np.array([pose.east, pose.north, sensor_height])

    # bounded primitives farther than max_range can never be hit; culling
    # them keeps scan cost local while preserving creation order
    reachable = []
    for i, prim in enumerate(world.primitives):
        if isinstance(prim, Box):
            margin = float(np.linalg.norm(np.asarray(prim.size)) / 2.0)
            d = math.hypot(prim.center[0] - origin[0], prim.center[1] - origin[1])
        elif isinstance(prim, Pole):
            margin = prim.radius
            d = math.hypot(prim.center[0] - origin[0], prim.center[1] - origin[1])
        else:
            margin, d = 0.0, 0.0
        if d - margin <= max_range:
            reachable.append(i)

    t_all = np.empty((len(reachable), dirs.shape[0]))
    for row, i in enumerate(reachable):
        prim = world.primitives[i]
        if isinstance(prim, Plane):
            t_all[row] = _intersect_plane(prim, origin, dirs)
        elif isinstance(prim, Box):
            t_all[row] = _intersect_box(prim, origin, dirs)
        else:
            t_all[row] = _intersect_pole(prim, origin, dirs)

    # argmin returns the first (lowest creation index) minimum, which is
    # the documented tie-break
    winner_row = np.argmin(t_all, axis=0)
    t_near = t_all[winner_row, np.arange(dirs.shape[0])]
    winner = np.asarray(reachable)[winner_row]
    hit = np.isfinite(t_near) & (t_near <= max_range)

    pts_world = origin[None, :] + t_near[hit, None] * dirs[hit]
    # return points in the sensor frame (sensor at origin, yaw removed,
    # so ground hits land at z = -sensor_height)
    rel = pts_world - origin[None, :]
    c, s = math.cos(-yaw), math.sin(-yaw)
    xyz = np.empty_like(rel)
    xyz[:, 0] = rel[:, 0] * c - rel[:, 1] * s
    xyz[:, 1] = rel[:, 0] * s + rel[:, 1] * c
    xyz[:, 2] = rel[:, 2]
    refl = np.array([world.primitives[i].reflectance for i in winner[hit]])
    return PointCloud(pose.frame_id, xyz, refl)
