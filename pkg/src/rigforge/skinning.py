"""Vertex-to-skeleton binding and influence weights.

Every vertex attaches to its nearest bone segment; influence then falls off
with a combined distance: the Euclidean hop from the vertex to its
attachment point plus the on-skeleton path from there to each joint. That
keeps influence routed along the joint tree, so e.g. a hand vertex is near
the hip only through the arm-trunk-leg path, not through space.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .mesh import Mesh
from .skeleton import Skeleton

__all__ = ["SkinBinding", "bind_vertices", "compute_weights", "rigidity_profile"]

_EPS = 1e-8
_CHUNK = 16384  # vertices per block in the bone-distance scan


@dataclass(frozen=True)
class SkinBinding:
    bone_of_vertex: np.ndarray  # (n,) bone index
    attachment_points: np.ndarray  # (n, 3) nearest point on that bone
    attachment_distances: np.ndarray  # (n,) Euclidean vertex-to-bone distance
    nearer_joints: np.ndarray  # (n,) bone endpoint joint nearest the attachment
    influence_radius_joints: int = 4
    joint_indices: np.ndarray = None  # (n, k) influencing joints
    joint_weights: np.ndarray = None  # (n, k) normalized weights

    def __post_init__(self):
        n = len(self.bone_of_vertex)
        if self.joint_indices is None:
            object.__setattr__(self, "joint_indices", np.zeros((n, 0), dtype=np.int64))
        if self.joint_weights is None:
            object.__setattr__(self, "joint_weights", np.zeros((n, 0)))

    @property
    def n_vertices(self) -> int:
        return len(self.bone_of_vertex)

    def weights_of(self, vertex: int) -> list[tuple[int, float]]:
        return [
            (int(j), float(w))
            for j, w in zip(self.joint_indices[vertex], self.joint_weights[vertex])
        ]

    def to_dict(self) -> dict:
        return {
            "bone_of_vertex": self.bone_of_vertex.tolist(),
            "attachment_points": self.attachment_points.tolist(),
            "attachment_distances": self.attachment_distances.tolist(),
            "nearer_joints": self.nearer_joints.tolist(),
            "influence_radius_joints": int(self.influence_radius_joints),
            "weights": [self.weights_of(v) for v in range(self.n_vertices)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkinBinding":
        weights = d["weights"]
        k = max((len(row) for row in weights), default=0)
        n = len(weights)
        joint_indices = np.zeros((n, k), dtype=np.int64)
        joint_weights = np.zeros((n, k))
        for v, row in enumerate(weights):
            for c, (j, w) in enumerate(row):
                joint_indices[v, c] = j
                joint_weights[v, c] = w
        return cls(
            bone_of_vertex=np.asarray(d["bone_of_vertex"], dtype=np.int64),
            attachment_points=np.asarray(d["attachment_points"], dtype=float),
            attachment_distances=np.asarray(d["attachment_distances"], dtype=float),
            nearer_joints=np.asarray(d["nearer_joints"], dtype=np.int64),
            influence_radius_joints=int(d["influence_radius_joints"]),
            joint_indices=joint_indices,
            joint_weights=joint_weights,
        )


def bind_vertices(mesh: Mesh, skeleton: Skeleton) -> SkinBinding:
    """Attach each vertex to the bone segment at minimum Euclidean distance.

    Ties go to the lower bone index (argmin over the bone axis). The
    attachment point, its distance, and the bone endpoint joint nearer the
    attachment (ties to the first endpoint) are recorded for the weight
    computation.
    """
    verts = mesh.vertices
    a = skeleton.joints[skeleton.bones[:, 0]]  # (b, 3)
    b = skeleton.joints[skeleton.bones[:, 1]]
    ab = b - a
    ab_sq = np.einsum("bk,bk->b", ab, ab)
    ab_sq_safe = np.where(ab_sq > 0, ab_sq, 1.0)

    n = len(verts)
    bone_of_vertex = np.empty(n, dtype=np.int64)
    attachment_points = np.empty((n, 3))
    attachment_distances = np.empty(n)
    nearer_joints = np.empty(n, dtype=np.int64)
    for lo in range(0, n, _CHUNK):
        v = verts[lo : lo + _CHUNK]
        t = np.einsum("vk,bk->vb", v, ab) - np.einsum("bk,bk->b", a, ab)
        t = np.clip(t / ab_sq_safe, 0.0, 1.0)  # (v, b)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(v[:, None, :] - proj, axis=2)
        best = np.argmin(d, axis=1)
        rows = np.arange(len(v))
        bone_of_vertex[lo : lo + len(v)] = best
        attachment_points[lo : lo + len(v)] = proj[rows, best]
        attachment_distances[lo : lo + len(v)] = d[rows, best]
        t_best = t[rows, best]
        ends = skeleton.bones[best]
        nearer_joints[lo : lo + len(v)] = np.where(t_best <= 0.5, ends[:, 0], ends[:, 1])

    return SkinBinding(
        bone_of_vertex=bone_of_vertex,
        attachment_points=attachment_points,
        attachment_distances=attachment_distances,
        nearer_joints=nearer_joints,
    )


def compute_weights(
    mesh: Mesh, skeleton: Skeleton, binding: SkinBinding, alpha: float = 2.0
) -> SkinBinding:
    """Fill per-vertex joint weights from the combined on-skeleton distance.

    d_j(v) = |v - attachment(v)| plus the skeleton geodesic from the
    attachment point to joint j (along the bone to whichever endpoint gives
    the shorter route, then tree path). A vertex attached at a bone midpoint
    is thus genuinely equidistant from both endpoint joints. Raw weight
    1/(d^alpha + 1e-8); the influence_radius_joints nearest joints are kept
    (ties to the lower joint index); normalized to sum 1.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n_joints = skeleton.n_joints
    paths = skeleton.path_length_matrix
    ends_a = skeleton.bones[binding.bone_of_vertex, 0]
    ends_b = skeleton.bones[binding.bone_of_vertex, 1]
    to_a = np.linalg.norm(binding.attachment_points - skeleton.joints[ends_a], axis=1)
    to_b = np.linalg.norm(binding.attachment_points - skeleton.joints[ends_b], axis=1)
    d = binding.attachment_distances[:, None] + np.minimum(
        to_a[:, None] + paths[ends_a], to_b[:, None] + paths[ends_b]
    )
    k = min(binding.influence_radius_joints, n_joints)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    rows = np.arange(len(d))[:, None]
    nearest = d[rows, order]
    raw = 1.0 / (nearest**alpha + _EPS)
    weights = raw / raw.sum(axis=1, keepdims=True)
    return replace(binding, joint_indices=order, joint_weights=weights)


def rigidity_profile(
    binding: SkinBinding, stiff_bones: set[int], stiffness: float = 1.0
) -> SkinBinding:
    """Sharpen the weights of vertices bound to the given bones.

    Each affected vertex's weights are raised to ``stiffness`` and
    renormalized, concentrating influence on its nearest joint; stiffness 1
    returns the binding unchanged.
    """
    if stiffness < 1.0:
        raise ValueError("stiffness must be >= 1")
    n_bones = (
        int(binding.bone_of_vertex.max()) + 1 if len(binding.bone_of_vertex) else 0
    )
    stiff = sorted(int(b) for b in stiff_bones)
    for b in stiff:
        if not 0 <= b < max(n_bones, 1):
            raise ValueError(f"unknown bone index: {b}")
    if stiffness == 1.0 or not stiff:
        return binding
    affected = np.isin(binding.bone_of_vertex, stiff)
    weights = binding.joint_weights.copy()
    sharpened = weights[affected] ** stiffness
    weights[affected] = sharpened / sharpened.sum(axis=1, keepdims=True)
    return replace(binding, joint_weights=weights)
