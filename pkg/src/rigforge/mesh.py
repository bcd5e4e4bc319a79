"""Triangle mesh container, OBJ-subset I/O, topology validation, and the
dihedral-deviation curviness metric.

The OBJ subset understood here is ``v x y z`` and ``f i j k`` with 1-based
indices; ``#`` comments are ignored and any other directive is skipped with a
warning. Polygon faces are fan-triangulated on load. Face winding is kept
exactly as read.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "TopologyReport",
    "MeshError",
    "MeshParseError",
    "EmptyMeshError",
    "MeshWarning",
    "load_mesh",
    "save_mesh",
    "validate_topology",
    "vertex_curviness",
    "vertex_areas",
    "face_areas",
    "face_normals",
]


class MeshError(ValueError):
    """Structurally invalid mesh data."""


class MeshParseError(MeshError):
    """Malformed OBJ content."""


class EmptyMeshError(MeshParseError):
    """OBJ file defines no vertices."""


class MeshWarning(UserWarning):
    """Recoverable oddity: skipped directive, non-manifold curviness fallback."""


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Mesh:
    """Indexed triangle mesh. Arrays are read-only after construction."""

    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int64
    normals: np.ndarray | None = None  # optional (n, 3) unit vectors

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {verts.shape}")
        if not np.isfinite(verts).all():
            raise MeshError("vertex coordinates must be finite")
        faces = np.asarray(self.faces, dtype=np.int64)
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {faces.shape}")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(verts):
                raise MeshError("face index out of range")
            degen = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 2] == faces[:, 0])
            )
            if degen.any():
                raise MeshError(f"face {int(np.flatnonzero(degen)[0])} repeats a vertex index")
        object.__setattr__(self, "vertices", _frozen(verts, float))
        object.__setattr__(self, "faces", _frozen(faces, np.int64))
        if self.normals is not None:
            object.__setattr__(self, "normals", _frozen(self.normals, float))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def bounds(self) -> np.ndarray:
        """(2, 3) array of per-axis min and max."""
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @property
    def diameter(self) -> float:
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """New mesh with replaced positions; the face array is shared."""
        m = Mesh.__new__(Mesh)
        object.__setattr__(m, "vertices", _frozen(np.asarray(vertices, dtype=float), float))
        object.__setattr__(m, "faces", self.faces)
        object.__setattr__(m, "normals", None)
        if m.vertices.shape != self.vertices.shape:
            raise MeshError("with_vertices must keep the vertex count")
        return m


def load_mesh(path) -> Mesh:
    """Parse an OBJ file (subset: v/f directives, triangles or fans)."""
    path = Path(path)
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    skipped: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) != 4:
                    raise MeshParseError(f"{path.name}:{lineno}: expected 'v x y z'")
                try:
                    verts.append([float(t) for t in tokens[1:4]])
                except ValueError as exc:
                    raise MeshParseError(f"{path.name}:{lineno}: bad coordinate: {exc}") from exc
            elif tag == "f":
                if len(tokens) < 4:
                    raise MeshParseError(f"{path.name}:{lineno}: face needs >= 3 indices")
                idx = []
                for tok in tokens[1:]:
                    head = tok.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshParseError(f"{path.name}:{lineno}: bad face index {tok!r}") from exc
                    if i <= 0:
                        raise MeshParseError(
                            f"{path.name}:{lineno}: face index {i} (OBJ indices are 1-based, positive)"
                        )
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
            else:
                if tag not in skipped:
                    skipped.add(tag)
                    warnings.warn(f"{path.name}: skipping unsupported directive {tag!r}", MeshWarning)
    if not verts:
        raise EmptyMeshError(f"{path.name}: no vertices")
    varr = np.array(verts, dtype=float)
    farr = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if farr.size and farr.max() >= len(varr):
        raise MeshParseError(f"{path.name}: face index {int(farr.max()) + 1} exceeds vertex count {len(varr)}")
    try:
        return Mesh(varr, farr)
    except MeshError as exc:
        raise MeshParseError(f"{path.name}: {exc}") from exc


def save_mesh(mesh: Mesh, path) -> None:
    """Write the OBJ subset. Coordinates use shortest round-trip formatting,
    so load(save(m)) reproduces positions exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def _edge_incidence(mesh: Mesh):
    """Unique undirected edges with incident-face lists.

    Returns (edges (e,2), counts (e,), first_face (e,), second_face (e,)),
    where second_face is -1 for boundary edges and arbitrary-beyond-second
    incidences are only reflected in counts.
    """
    f = mesh.faces
    if len(f) == 0:
        z = np.zeros(0, dtype=np.int64)
        return z.reshape(0, 2), z, z, z
    raw = f[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    raw = np.sort(raw, axis=1)
    face_of = np.repeat(np.arange(len(f), dtype=np.int64), 3)
    order = np.lexsort((raw[:, 1], raw[:, 0]))
    raw, face_of = raw[order], face_of[order]
    change = np.ones(len(raw), dtype=bool)
    change[1:] = (raw[1:] != raw[:-1]).any(axis=1)
    starts = np.flatnonzero(change)
    counts = np.diff(np.append(starts, len(raw)))
    edges = raw[starts]
    first = face_of[starts]
    second = np.full(len(starts), -1, dtype=np.int64)
    has2 = counts >= 2
    second[has2] = face_of[starts[has2] + 1]
    return edges, counts.astype(np.int64), first, second


@dataclass(frozen=True)
class TopologyReport:
    is_closed: bool
    boundary_edge_count: int
    non_manifold_edge_count: int
    connected_component_count: int

    def to_dict(self) -> dict:
        return {
            "is_closed": self.is_closed,
            "boundary_edge_count": self.boundary_edge_count,
            "non_manifold_edge_count": self.non_manifold_edge_count,
            "connected_component_count": self.connected_component_count,
        }


def validate_topology(mesh: Mesh) -> TopologyReport:
    """Edge-incidence census: 1 incident face = boundary, >2 = non-manifold.
    Components are counted over vertices connected through faces."""
    edges, counts, _, _ = _edge_incidence(mesh)
    boundary = int((counts == 1).sum())
    nonmanifold = int((counts > 2).sum())

    parent = np.arange(mesh.n_vertices, dtype=np.int64)

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for a, b in edges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[rb] = ra
    used = np.unique(mesh.faces) if mesh.n_faces else np.zeros(0, dtype=np.int64)
    components = len({find(int(v)) for v in used})
    return TopologyReport(
        is_closed=boundary == 0 and nonmanifold == 0,
        boundary_edge_count=boundary,
        non_manifold_edge_count=nonmanifold,
        connected_component_count=components,
    )


def face_normals(mesh: Mesh, unit: bool = True) -> np.ndarray:
    v = mesh.vertices
    f = mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    if unit:
        lengths = np.linalg.norm(n, axis=1)
        lengths[lengths == 0.0] = 1.0
        n = n / lengths[:, None]
    return n


def face_areas(mesh: Mesh) -> np.ndarray:
    return 0.5 * np.linalg.norm(face_normals(mesh, unit=False), axis=1)


def vertex_areas(mesh: Mesh) -> np.ndarray:
    """One-ring face area / 3 per vertex (barycentric area share)."""
    areas = np.zeros(mesh.n_vertices)
    fa = face_areas(mesh) / 3.0
    for k in range(3):
        np.add.at(areas, mesh.faces[:, k], fa)
    return areas


def vertex_curviness(mesh: Mesh) -> np.ndarray:
    """Per-vertex surface-bending measure: the area-weighted mean, over
    incident interior edges, of the dihedral deviation from flat.

    The deviation of an edge is the angle between its two face normals
    (|pi - dihedral angle|), weighted by the summed area of those faces.
    Planar regions score 0 and the value is invariant under rigid motion.
    Vertices touching a non-manifold edge get 0 and are reported in a
    MeshWarning; vertices with no interior edge (boundary corners, isolated
    vertices) get 0 silently.
    """
    values = np.zeros(mesh.n_vertices)
    edges, counts, first, second = _edge_incidence(mesh)
    if len(edges) == 0:
        return values
    areas = face_areas(mesh)
    normals = face_normals(mesh)

    interior = counts == 2
    e = edges[interior]
    f1, f2 = first[interior], second[interior]
    cosang = np.clip(np.einsum("ij,ij->i", normals[f1], normals[f2]), -1.0, 1.0)
    deviation = np.arccos(cosang)
    # arccos is ill-conditioned at 1, so coplanar faces would otherwise score
    # rounding noise instead of an exact 0; snap angles below the noise floor
    deviation[cosang > 1.0 - 1e-12] = 0.0
    weight = areas[f1] + areas[f2]

    num = np.zeros(mesh.n_vertices)
    den = np.zeros(mesh.n_vertices)
    for k in (0, 1):
        np.add.at(num, e[:, k], weight * deviation)
        np.add.at(den, e[:, k], weight)
    mask = den > 0.0
    values[mask] = num[mask] / den[mask]

    bad_edges = edges[counts > 2]
    if len(bad_edges):
        bad = np.unique(bad_edges)
        values[bad] = 0.0
        warnings.warn(
            f"curviness set to 0 at {len(bad)} non-manifold vertices: {bad[:8].tolist()}...",
            MeshWarning,
        )
    return values
