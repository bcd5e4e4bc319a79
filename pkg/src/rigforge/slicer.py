"""Cross-section scanning of a closed, frame-aligned mesh.

The mesh is cut by evenly spaced planes perpendicular to the major axis
(axis 0 after frame alignment). From each slice's axis point, rays are cast
inside the plane and intersections are classified by parity: a point is
interior exactly when a ray from it crosses the surface an odd number of
times. Cross-sections made of several disjoint loops (e.g. a torso flanked
by two arms) are separated by refining candidate centers into one center
per loop, and the per-slice centers are then linked across slices into
labeled part chains (one torso plus limbs).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, face_normals, validate_topology

__all__ = [
    "OpenMeshError",
    "NoInteriorError",
    "SliceConfig",
    "PointGroup",
    "Slice",
    "Chain",
    "PartChains",
    "intersect_ray",
    "slice_mesh",
    "refine_center",
    "classify_parts",
    "worker_count",
]

MODES = ("nearest", "all", "parity-refined")

_GRAZE_COS = 1e-6  # |direction . normal| below this counts as a grazing hit
_JITTER = 1e-4  # radians applied once to a grazing ray
_MIN_T = 1e-9  # hits closer than this are the origin itself
_DEDUPE = 1e-9  # hits within this distance collapse to one (shared edges)


class OpenMeshError(ValueError):
    """The operation requires a closed (watertight) mesh."""


class NoInteriorError(RuntimeError):
    """Center refinement found no interior point for any candidate."""


def worker_count() -> int:
    """Thread cap from RIGFORGE_THREADS (0 or unset = one per CPU)."""
    raw = os.environ.get("RIGFORGE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def _perpendicular(d: np.ndarray) -> np.ndarray:
    basis = np.zeros(3)
    basis[int(np.argmin(np.abs(d)))] = 1.0
    u = np.cross(d, basis)
    return u / np.linalg.norm(u)


def _rotate_about(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * float(axis @ v) * (1.0 - c)


class RayCaster:
    """Precomputed triangle data for casting many rays against one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        v = mesh.vertices
        f = mesh.faces
        self.v0 = v[f[:, 0]]
        self.e1 = v[f[:, 1]] - self.v0
        self.e2 = v[f[:, 2]] - self.v0
        self.normals = face_normals(mesh)
        self._fan_cache: dict[bytes, tuple] = {}

    def _prepared(self, dirs: np.ndarray) -> tuple:
        """Origin-independent Moller-Trumbore terms for a direction fan.

        Slicing and center polishing recast the same fan from many origins,
        so the (rays x faces) cross products are cached per fan.
        """
        cacheable = len(dirs) >= 8  # one-off probe rays would churn the cache
        key = dirs.tobytes() if cacheable else None
        prep = self._fan_cache.get(key) if cacheable else None
        if prep is None:
            h = np.cross(dirs[:, None, :], self.e2[None, :, :])  # (r, f, 3)
            det = np.einsum("fk,rfk->rf", self.e1, h)
            ok = np.abs(det) > 1e-12
            inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            graze_rf = np.abs(dirs @ self.normals.T) < _GRAZE_COS
            prep = (h, ok, inv, graze_rf)
            if cacheable:
                if len(self._fan_cache) >= 8:
                    self._fan_cache.pop(next(iter(self._fan_cache)))
                self._fan_cache[key] = prep
        return prep

    def _raw_hits(self, origin: np.ndarray, dirs: np.ndarray):
        """Per-ray arrays of (sorted unique hit distances, grazing flag)."""
        h, ok, inv, graze_rf = self._prepared(dirs)
        s = origin - self.v0  # (f, 3)
        q = np.cross(s, self.e1)  # (f, 3)
        u = np.einsum("rfk,fk->rf", h, s) * inv
        vpar = (dirs @ q.T) * inv
        t = np.einsum("fk,fk->f", self.e2, q)[None, :] * inv
        eps = 1e-12
        hit = ok & (u >= -eps) & (vpar >= -eps) & (u + vpar <= 1.0 + eps) & (t > _MIN_T)
        graze = hit & graze_rf
        out = []
        for r in range(len(dirs)):
            ts = np.sort(t[r, hit[r]])
            if len(ts) > 1:
                keep = np.concatenate([[True], np.diff(ts) > _DEDUPE])
                ts = ts[keep]
            out.append((ts, bool(graze[r].any())))
        return out

    def cast(self, origin, dirs, jitter_axis=None) -> list[np.ndarray]:
        """Sorted, deduplicated hit distances per ray.

        A ray with a grazing hit (|direction . face normal| < 1e-6) is
        retried once with its direction rotated by 1e-4 radians about
        ``jitter_axis`` (default: a fixed perpendicular), which keeps the
        parity argument sound on tangential contacts.
        """
        origin = np.asarray(origin, dtype=float)
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        raw = self._raw_hits(origin, dirs)
        hits = []
        for r, (ts, grazed) in enumerate(raw):
            if grazed:
                axis = jitter_axis if jitter_axis is not None else _perpendicular(dirs[r])
                jittered = _rotate_about(dirs[r], np.asarray(axis, dtype=float), _JITTER)
                jittered /= np.linalg.norm(jittered)
                ts = self._raw_hits(origin, jittered[None, :])[0][0]
            hits.append(ts)
        return hits

    def is_interior(self, point, dirs, jitter_axis=None, min_odd_fraction: float = 0.9):
        """(interior?, odd-ray fraction) by the parity vote over ``dirs``."""
        hits = self.cast(point, dirs, jitter_axis)
        odd = sum(1 for ts in hits if len(ts) % 2 == 1)
        frac = odd / len(hits)
        return frac >= min_odd_fraction, frac


def intersect_ray(mesh: Mesh, origin, direction) -> list[tuple[float, np.ndarray]]:
    """All ray/surface hits beyond the origin, as (distance, point), ascending.

    Hits within 1e-9 of each other (shared triangle edges) collapse to one.
    """
    direction = np.asarray(direction, dtype=float)
    origin = np.asarray(origin, dtype=float)
    ts = RayCaster(mesh).cast(origin, direction[None, :])[0]
    return [(float(t), origin + float(t) * direction) for t in ts]


# --------------------------------------------------------------------- types

@dataclass(frozen=True)
class SliceConfig:
    slice_count: int = 32
    ray_count: int = 64
    mode: str = "parity-refined"

    def __post_init__(self):
        if self.slice_count < 2:
            raise ValueError("slice_count must be >= 2")
        if self.ray_count < 8:
            raise ValueError("ray_count must be >= 8")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class PointGroup:
    points: np.ndarray  # (k, 3) surface points
    parity_valid: bool
    center: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "center", pts.mean(axis=0))

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "points": self.points.tolist(),
            "parity_valid": self.parity_valid,
        }


@dataclass(frozen=True)
class Slice:
    axis_coordinate: float
    ray_count: int
    groups: tuple[PointGroup, ...]

    def to_dict(self) -> dict:
        return {
            "axis_coordinate": self.axis_coordinate,
            "ray_count": self.ray_count,
            "groups": [g.to_dict() for g in self.groups],
        }


@dataclass(frozen=True)
class Chain:
    label: str  # "torso" or "limb_<k>"
    slice_indices: tuple[int, ...]
    centers: np.ndarray  # (n, 3) in slice order
    areas: np.ndarray  # (n,) cross-section polygon areas

    @property
    def is_torso(self) -> bool:
        return self.label == "torso"

    def __len__(self) -> int:
        return len(self.slice_indices)


@dataclass(frozen=True)
class PartChains:
    chains: tuple[Chain, ...]
    median_spacing: float
    slice_count: int

    @property
    def torso(self) -> Chain:
        for c in self.chains:
            if c.is_torso:
                return c
        raise ValueError("no torso chain")

    @property
    def limbs(self) -> tuple[Chain, ...]:
        return tuple(c for c in self.chains if not c.is_torso)


# ------------------------------------------------------------------ slicing

def _in_plane_dirs(normal: np.ndarray, ray_count: int) -> np.ndarray:
    u = _perpendicular(normal)
    w = np.cross(normal, u)
    theta = 2.0 * math.pi * np.arange(ray_count) / ray_count
    return np.outer(np.cos(theta), u) + np.outer(np.sin(theta), w)


def _group_sort_angle(group: PointGroup, origin: np.ndarray, normal: np.ndarray) -> float:
    u = _perpendicular(normal)
    w = np.cross(normal, u)
    rel = group.points[0] - origin
    return math.atan2(float(rel @ w), float(rel @ u))


def _same_part(caster: RayCaster, a: np.ndarray, b: np.ndarray) -> bool:
    """True when the open segment between two interior points crosses no wall.

    Exact for convex cross-sections; a non-convex loop may be split into
    several groups (chained back together by part classification).
    """
    delta = b - a
    dist = float(np.linalg.norm(delta))
    if dist < 1e-12:
        return True
    ts = caster.cast(a, (delta / dist)[None, :])[0]
    return not np.any(ts < dist - 1e-9)


def _polish_center(caster, center, dirs, normal):
    """Drive a fan origin to its fixed point: the point equal to the mean of
    its own nearest odd-ray hits.

    A fan cast from an off-center origin averages to a point roughly halfway
    back toward the true section center, so iterating contracts the offset
    geometrically; the fixed point is the section center itself for symmetric
    loops. Returns the converged origin plus its fan (per-ray hits and odd
    flags) so the caller can reuse the final cast.
    """
    per_ray = caster.cast(center, dirs, jitter_axis=normal)
    odd = np.array([len(ts) % 2 == 1 for ts in per_ray])
    for _ in range(48):
        points = [center + ts[0] * d for ts, d, is_odd in zip(per_ray, dirs, odd) if is_odd]
        if len(points) < 3:
            break
        delta = np.mean(points, axis=0) - center
        if np.linalg.norm(delta) < 1e-12:
            break
        # the mean recovers about half the offset per step, so doubling the
        # move lands near the fixed point; fall back to the plain mean when
        # the extrapolated target exits the section
        moved = False
        for target in (center + 2.0 * delta, center + delta):
            fan = caster.cast(target, dirs, jitter_axis=normal)
            fan_odd = np.array([len(ts) % 2 == 1 for ts in fan])
            if fan_odd.mean() >= 0.9:
                center, per_ray, odd = target, fan, fan_odd
                moved = True
                break
        if not moved:
            break
    return center, per_ray, odd


def refine_center(mesh, candidate_center, plane_normal, ray_count: int, *, _caster=None):
    """Split a slice-plane candidate into one interior center per section loop.

    Rays are cast in-plane from the candidate. Odd-parity candidates are
    interior: they contribute a group of their nearest hits (rays whose own
    count is even are discarded as grazers), with the group center polished
    to the fan's fixed point so it does not inherit the candidate's offset.
    Consecutive hit pairs beyond a candidate's own section bound the other
    loops crossing the plane; their midpoints are refined recursively (depth
    capped at 3) and deduplicated by checking whether two centers see each
    other without crossing a wall.

    Returns the discovered groups sorted by the in-plane angle of their
    first point about the original candidate; raises NoInteriorError when
    every candidate ends up exterior.
    """
    caster = _caster if _caster is not None else RayCaster(mesh)
    origin = np.asarray(candidate_center, dtype=float)
    normal = np.asarray(plane_normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    dirs = _in_plane_dirs(normal, ray_count)

    accepted: list[tuple[np.ndarray, PointGroup]] = []
    queue: list[tuple[np.ndarray, int]] = [(origin, 0)]
    pending: list[np.ndarray] = [origin]

    while queue:
        center, depth = queue.pop(0)
        per_ray = caster.cast(center, dirs, jitter_axis=normal)
        odd = np.array([len(ts) % 2 == 1 for ts in per_ray])
        if not any(len(ts) for ts in per_ray):
            continue
        interior = odd.mean() >= 0.9

        if interior and not any(_same_part(caster, center, c) for c, _ in accepted):
            polished, fan, fan_odd = _polish_center(caster, center, dirs, normal)
            points = np.array(
                [polished + ts[0] * d for ts, d, is_odd in zip(fan, dirs, fan_odd) if is_odd and len(ts)]
            )
            if len(points) >= 3:
                valid, _ = caster.is_interior(points.mean(axis=0), dirs, jitter_axis=normal)
                accepted.append((polished, PointGroup(points, parity_valid=valid)))

        if depth >= 3:
            continue
        for ts, d, is_odd in zip(per_ray, dirs, odd):
            # interior intervals along this ray that belong to other loops:
            # beyond the own-section exit for an interior origin, or between
            # entry/exit pairs for an exterior origin
            start = 1 if is_odd else 0
            for k in range(start, len(ts) - 1, 2):
                mid = center + 0.5 * (ts[k] + ts[k + 1]) * d
                if any(_same_part(caster, mid, c) for c, _ in accepted):
                    continue
                if any(_same_part(caster, mid, c) for c in pending):
                    continue
                pending.append(mid)
                queue.append((mid, depth + 1))

    if not accepted:
        raise NoInteriorError("no interior center found in the slice plane")
    accepted.sort(key=lambda cg: _group_sort_angle(cg[1], origin, normal))
    return [g for _, g in accepted]


def _single_group_slice(caster, origin, dirs, normal, nearest_only: bool):
    per_ray = caster.cast(origin, dirs, jitter_axis=normal)
    pts = []
    for ts, d in zip(per_ray, dirs):
        take = ts[:1] if nearest_only else ts
        pts.extend(origin + float(t) * d for t in take)
    if len(pts) < 3:
        return ()
    points = np.array(pts)
    valid, _ = caster.is_interior(points.mean(axis=0), dirs, jitter_axis=normal)
    if not valid:
        return ()
    return (PointGroup(points, parity_valid=True),)


def slice_mesh(mesh: Mesh, config: SliceConfig | None = None) -> list[Slice]:
    """Cut ``slice_count`` evenly spaced cross-sections along axis 0.

    The mesh must be closed and frame-aligned (major axis = axis 0). Rays
    start at the slice's axis point. Modes: ``nearest`` keeps the first hit
    per ray, ``all`` keeps every hit — both as a single group per slice —
    and ``parity-refined`` (default) splits the section into one group per
    disjoint loop via refine_center. Groups whose center fails the interior
    parity vote are dropped, as are groups with fewer than 3 points.
    """
    config = config or SliceConfig()
    if not validate_topology(mesh).is_closed:
        raise OpenMeshError("slicing requires a closed mesh")
    caster = RayCaster(mesh)
    normal = np.array([1.0, 0.0, 0.0])
    dirs = _in_plane_dirs(normal, config.ray_count)
    lo = float(mesh.vertices[:, 0].min())
    hi = float(mesh.vertices[:, 0].max())
    step = (hi - lo) / config.slice_count
    coords = [lo + (j + 0.5) * step for j in range(config.slice_count)]

    def build(x: float) -> Slice:
        origin = np.array([x, 0.0, 0.0])
        if config.mode == "parity-refined":
            try:
                groups = tuple(
                    g
                    for g in refine_center(mesh, origin, normal, config.ray_count, _caster=caster)
                    if g.parity_valid and len(g.points) >= 3
                )
            except NoInteriorError:
                groups = ()
        else:
            groups = _single_group_slice(caster, origin, dirs, normal, config.mode == "nearest")
        return Slice(axis_coordinate=x, ray_count=config.ray_count, groups=groups)

    workers = min(worker_count(), config.slice_count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(build, coords))
    else:
        slices = [build(x) for x in coords]
    return slices


# -------------------------------------------------------------- part chains

def _polygon_area(points: np.ndarray, center: np.ndarray) -> float:
    """Shoelace area of the in-plane polygon (points sorted by angle)."""
    rel = points[:, 1:] - center[1:]
    order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
    yz = rel[order]
    x, y = yz[:, 0], yz[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def classify_parts(slices: list[Slice]) -> PartChains:
    """Link group centers across adjacent slices into labeled part chains.

    Centers in adjacent slices are linked when they are mutual nearest
    neighbors within 1.5x the median inter-slice center spacing, which keeps
    separate parts (arms vs. torso) from fusing. Among chains longer than a
    quarter of the slice count, the one with the largest mean cross-section
    area is the torso (falling back to the longest chain); the rest are
    limbs, ordered by their first slice.
    """
    if len(slices) < 2:
        raise ValueError("classify_parts needs >= 2 slices")
    nodes = []  # (slice_idx, center, area)
    per_slice: list[list[int]] = []
    for si, sl in enumerate(slices):
        ids = []
        for g in sl.groups:
            ids.append(len(nodes))
            nodes.append((si, g.center, _polygon_area(g.points, g.center)))
        per_slice.append(ids)

    gaps = []
    for si in range(len(slices) - 1):
        nxt = per_slice[si + 1]
        if not nxt:
            continue
        nxt_centers = np.array([nodes[j][1] for j in nxt])
        for i in per_slice[si]:
            d = np.linalg.norm(nxt_centers - nodes[i][1], axis=1)
            gaps.append(float(d.min()))
    if gaps:
        median_spacing = float(np.median(gaps))
    else:
        xs = [s.axis_coordinate for s in slices]
        median_spacing = float(np.median(np.diff(xs))) if len(xs) > 1 else 1.0
    radius = 1.5 * median_spacing

    nxt_link = {}
    prev_link = {}
    for si in range(len(slices) - 1):
        a_ids, b_ids = per_slice[si], per_slice[si + 1]
        if not a_ids or not b_ids:
            continue
        a = np.array([nodes[i][1] for i in a_ids])
        b = np.array([nodes[j][1] for j in b_ids])
        d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
        for ai in range(len(a_ids)):
            bi = int(np.argmin(d[ai]))
            if d[ai, bi] <= radius and int(np.argmin(d[:, bi])) == ai:  # mutual
                nxt_link[a_ids[ai]] = b_ids[bi]
                prev_link[b_ids[bi]] = a_ids[ai]

    raw_chains = []
    for start in range(len(nodes)):
        if start in prev_link:
            continue
        path = [start]
        while path[-1] in nxt_link:
            path.append(nxt_link[path[-1]])
        raw_chains.append(path)
    raw_chains.sort(key=lambda p: (nodes[p[0]][0], p[0]))

    eligible = [ci for ci, p in enumerate(raw_chains) if len(p) > 0.25 * len(slices)]
    if eligible:
        torso_idx = max(eligible, key=lambda ci: float(np.mean([nodes[i][2] for i in raw_chains[ci]])))
    else:
        torso_idx = max(range(len(raw_chains)), key=lambda ci: len(raw_chains[ci]))

    chains = []
    limb_no = 0
    for ci, path in enumerate(raw_chains):
        if ci == torso_idx:
            label = "torso"
        else:
            limb_no += 1
            label = f"limb_{limb_no}"
        chains.append(
            Chain(
                label=label,
                slice_indices=tuple(nodes[i][0] for i in path),
                centers=np.array([nodes[i][1] for i in path]),
                areas=np.array([nodes[i][2] for i in path]),
            )
        )
    return PartChains(chains=tuple(chains), median_spacing=median_spacing, slice_count=len(slices))
