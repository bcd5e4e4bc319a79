"""Procedural closed-mesh generators used by the test fixtures, the demo
scripts, and the docs: boxes, spheres, swept tubes, and the multi-tube
character bodies (knee, humanoid, Y-tube).

All generators produce watertight meshes with outward-facing windings.
Character bodies are disjoint unions of closed tubes: closedness holds
edge-by-edge, which is all the parity machinery needs, and keeps the
fixtures simple to reason about.
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import Mesh

__all__ = [
    "box",
    "symmetric_box",
    "uv_sphere",
    "tube",
    "cylinder",
    "grid_patch",
    "knee_fixture",
    "humanoid_fixture",
    "y_tube_fixture",
    "parallel_cylinders_fixture",
    "disjoint_union",
    "hinge_bend",
]

_BOX_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # -z
        [4, 5, 6], [4, 6, 7],  # +z
        [0, 1, 5], [0, 5, 4],  # -y
        [3, 7, 6], [3, 6, 2],  # +y
        [0, 4, 7], [0, 7, 3],  # -x
        [1, 2, 6], [1, 6, 5],  # +x
    ],
    dtype=np.int64,
)


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> Mesh:
    """Axis-aligned closed box: 8 vertices, 12 triangles."""
    sx, sy, sz = (0.5 * s for s in size)
    cx, cy, cz = center
    corners = np.array(
        [
            [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
            [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
        ]
    ) + np.array([cx, cy, cz])
    return Mesh(corners, _BOX_FACES)


def symmetric_box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> Mesh:
    """Closed box with a center-fan on every face (14 vertices, 24 triangles).

    Unlike :func:`box`, every corner sees an identical edge configuration
    (three creased box edges plus three in-plane fan edges), so corner
    quantities that depend on the local triangulation agree on all eight
    corners exactly.
    """
    base = box(size, center)
    verts = [base.vertices]
    faces = []
    quads = [
        (0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
        (3, 7, 6, 2), (0, 4, 7, 3), (1, 2, 6, 5),
    ]
    for fi, quad in enumerate(quads):
        mid = base.vertices[list(quad)].mean(axis=0)
        verts.append(mid[None, :])
        m = 8 + fi
        for a, b in zip(quad, quad[1:] + quad[:1]):
            faces.append([a, b, m])
    return Mesh(np.vstack(verts), np.array(faces, dtype=np.int64))


def uv_sphere(radius: float = 1.0, rings: int = 12, segments: int = 24, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Latitude/longitude sphere with pole fans; (rings-1)*segments + 2 vertices."""
    if rings < 2 or segments < 3:
        raise ValueError("uv_sphere needs rings >= 2 and segments >= 3")
    c = np.asarray(center, dtype=float)
    verts = [c + [0.0, 0.0, radius]]
    for i in range(1, rings):
        phi = math.pi * i / rings
        z = radius * math.cos(phi)
        r = radius * math.sin(phi)
        for j in range(segments):
            th = 2.0 * math.pi * j / segments
            verts.append(c + [r * math.cos(th), r * math.sin(th), z])
    verts.append(c + [0.0, 0.0, -radius])
    south = len(verts) - 1

    def ring_start(i):  # i in 1..rings-1
        return 1 + (i - 1) * segments

    faces = []
    for j in range(segments):
        faces.append([0, ring_start(1) + j, ring_start(1) + (j + 1) % segments])
    for i in range(1, rings - 1):
        a, b = ring_start(i), ring_start(i + 1)
        for j in range(segments):
            jn = (j + 1) % segments
            faces.append([a + j, b + j, b + jn])
            faces.append([a + j, b + jn, a + jn])
    last = ring_start(rings - 1)
    for j in range(segments):
        faces.append([south, last + (j + 1) % segments, last + j])
    return Mesh(np.array(verts), np.array(faces, dtype=np.int64))


def _perpendicular(d: np.ndarray) -> np.ndarray:
    pick = int(np.argmin(np.abs(d)))
    basis = np.zeros(3)
    basis[pick] = 1.0
    u = np.cross(d, basis)
    return u / np.linalg.norm(u)


def tube(path, radius: float, rings: int, segments: int) -> Mesh:
    """Closed tube swept along a polyline, capped with triangle fans.

    Rings are spaced uniformly by arc length; a ring landing on an interior
    polyline vertex is mitered (its plane bisects the bend). Ring frames are
    parallel-transported to avoid twist. Vertex count is rings * segments,
    face count 2*segments*(rings-1) + 2*(segments-2).
    """
    path = np.asarray(path, dtype=float)
    if len(path) < 2 or rings < 2 or segments < 3:
        raise ValueError("tube needs >= 2 path points, >= 2 rings, >= 3 segments")
    deltas = np.diff(path, axis=0)
    seg_len = np.linalg.norm(deltas, axis=1)
    if (seg_len <= 0.0).any():
        raise ValueError("degenerate polyline segment")
    dirs = deltas / seg_len[:, None]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]

    centers = np.empty((rings, 3))
    ring_dirs = np.empty((rings, 3))
    for k in range(rings):
        s = total * k / (rings - 1)
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg_len) - 1)
        t = (s - cum[i]) / seg_len[i]
        centers[k] = path[i] + t * deltas[i]
        # miter when sitting on an interior corner
        on_corner = i + 1 < len(path) - 1 and abs(s - cum[i + 1]) <= 1e-12 * max(total, 1.0)
        if on_corner:
            m = dirs[i] + dirs[i + 1]
            ring_dirs[k] = m / np.linalg.norm(m)
        elif t >= 1.0 - 1e-12 and i + 1 < len(seg_len):
            m = dirs[i] + dirs[i + 1]
            ring_dirs[k] = m / np.linalg.norm(m)
        else:
            ring_dirs[k] = dirs[i]

    verts = np.empty((rings * segments, 3))
    u = _perpendicular(ring_dirs[0])
    phis = 2.0 * math.pi * np.arange(segments) / segments
    for k in range(rings):
        d = ring_dirs[k]
        u = u - float(u @ d) * d  # transport previous in-plane axis
        u /= np.linalg.norm(u)
        w = np.cross(d, u)
        ring = centers[k] + radius * (np.outer(np.cos(phis), u) + np.outer(np.sin(phis), w))
        verts[k * segments:(k + 1) * segments] = ring

    faces = []
    for k in range(rings - 1):
        a, b = k * segments, (k + 1) * segments
        for j in range(segments):
            jn = (j + 1) % segments
            faces.append([a + j, b + jn, b + j])
            faces.append([a + j, a + jn, b + jn])
    for j in range(1, segments - 1):  # start cap, outward along -ring_dirs[0]
        faces.append([0, j + 1, j])
    last = (rings - 1) * segments
    for j in range(1, segments - 1):  # end cap, outward along +ring_dirs[-1]
        faces.append([last, last + j, last + j + 1])
    return Mesh(verts, np.array(faces, dtype=np.int64))


def cylinder(length: float = 2.0, radius: float = 0.3, rings: int = 16, segments: int = 24,
             axis=(1.0, 0.0, 0.0), center=(0.0, 0.0, 0.0)) -> Mesh:
    d = np.asarray(axis, dtype=float)
    d = d / np.linalg.norm(d)
    c = np.asarray(center, dtype=float)
    return tube([c - 0.5 * length * d, c + 0.5 * length * d], radius, rings, segments)


def grid_patch(nx: int = 8, ny: int = 8, spacing: float = 1.0) -> Mesh:
    """Open planar grid in the z=0 plane (boundary edges on the rim)."""
    xs = np.arange(nx) * spacing
    ys = np.arange(ny) * spacing
    verts = np.array([[x, y, 0.0] for y in ys for x in xs])
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            faces.append([a, a + 1, a + nx + 1])
            faces.append([a, a + nx + 1, a + nx])
    return Mesh(verts, np.array(faces, dtype=np.int64))


def disjoint_union(*meshes: Mesh) -> Mesh:
    """Concatenate meshes into one (offsetting face indices)."""
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return Mesh(np.vstack(verts), np.vstack(faces))


def knee_fixture() -> Mesh:
    """Leg with a 25-degree resting bend at the knee: exactly 891 vertices.

    27 rings x 33 segments along a two-segment polyline (hip at the origin,
    knee at x=1, shank angled upward in the xy-plane). The resting bend is
    what lets the skeleton stage place a knee joint, and the thigh/shank
    length asymmetry (1.0 vs 0.8) keeps the knee's solved rotation under a
    large bend well clear of the flag threshold boundary.
    """
    bend = math.radians(25.0)
    hip = [0.0, 0.0, 0.0]
    knee = [1.0, 0.0, 0.0]
    ankle = [1.0 + 0.8 * math.cos(bend), 0.8 * math.sin(bend), 0.0]
    return tube([hip, knee, ankle], radius=0.12, rings=27, segments=33)


def humanoid_fixture() -> Mesh:
    """Stick figure: thick trunk along +x plus four thinner diagonal limbs.

    Tubes are disjoint and individually closed. Proportions are tuned so the
    part classifier separates five chains (limb centers sit farther than the
    chain-link radius from the trunk axis, but close enough to attach to it).
    """
    trunk = tube([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]], radius=0.15, rings=30, segments=24)
    arm_l = tube([[2.2, 0.25, 0.0], [1.4, 0.85, 0.0]], radius=0.07, rings=14, segments=14)
    arm_r = tube([[2.2, -0.25, 0.0], [1.4, -0.85, 0.0]], radius=0.07, rings=14, segments=14)
    leg_l = tube([[0.5, 0.0, 0.25], [-0.6, 0.0, 0.72]], radius=0.08, rings=16, segments=14)
    leg_r = tube([[0.5, 0.0, -0.25], [-0.6, 0.0, -0.72]], radius=0.08, rings=16, segments=14)
    return disjoint_union(trunk, arm_l, arm_r, leg_l, leg_r)


def y_tube_fixture() -> Mesh:
    """Thick stem along +x with two thin diagonal branches past its tip."""
    stem = tube([[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]], radius=0.12, rings=16, segments=16)
    up = tube([[1.52, 0.2, 0.0], [2.8, 0.92, 0.0]], radius=0.07, rings=14, segments=12)
    down = tube([[1.52, -0.2, 0.0], [2.8, -0.92, 0.0]], radius=0.07, rings=14, segments=12)
    return disjoint_union(stem, up, down)


def parallel_cylinders_fixture(separation: float = 1.2) -> Mesh:
    """Two long disjoint cylinders, far enough apart that their slice-center
    chains can never link, yet aligned so the shared major axis is their own."""
    a = cylinder(length=4.0, radius=0.2, rings=24, center=(0.0, 0.5 * separation, 0.0))
    b = cylinder(length=4.0, radius=0.2, rings=24, center=(0.0, -0.5 * separation, 0.0))
    return disjoint_union(a, b)


def hinge_bend(mesh: Mesh, pivot, axis, angle: float, along: int = 0) -> Mesh:
    """Analytic hinge: rigidly rotate every vertex past the pivot plane.

    Vertices whose coordinate ``along`` exceeds the pivot's are rotated by
    ``angle`` about ``axis`` through ``pivot``; the rest stay put. Used as an
    MLS-free bending oracle for the distortion metric.
    """
    from .linalg import quat_to_matrix, rotvec_to_quat

    pivot = np.asarray(pivot, dtype=float)
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    rot = quat_to_matrix(rotvec_to_quat(a * angle))
    v = mesh.vertices.copy()
    sel = v[:, along] > pivot[along]
    v[sel] = (v[sel] - pivot) @ rot.T + pivot
    return mesh.with_vertices(v)
