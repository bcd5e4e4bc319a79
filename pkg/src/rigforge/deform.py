"""Joint-space rigid transforms from control handles, blended onto vertices.

The user pins a subset of joints (handles) to target positions. Every joint
then solves a small weighted rigid-fit problem over the handles, with weights
falling off by on-skeleton path distance, so a dragged wrist turns the elbow
a lot and the opposite ankle almost not at all. Each joint caches its rotation
(unit quaternion + rotation vector), the weighted rest/target centroids, and
the equivalent translation; vertices blend those per-joint transforms with
their skinning weights (linear blend skinning).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import (
    IDENTITY_QUAT,
    jacobi_eigh,
    quat_to_rotvec,
    quats_to_matrices,
    rotation_between,
    weighted_rigid_quat,
)
from .mesh import Mesh
from .skinning import SkinBinding
from .skeleton import Skeleton

__all__ = [
    "ControlHandles",
    "DeformationCache",
    "Pose",
    "DegenerateRotationWarning",
    "solve_joint_transforms",
    "solve_pose",
    "blend_vertices",
    "deform",
]

_EPS = 1e-8  # weight floor, keeps a handle's own joint finite and dominant
_COLLINEAR_RATIO = 1e-10  # second/first eigenvalue ratio treated as rank < 2


class DegenerateRotationWarning(UserWarning):
    """The handle set cannot pin down a full 3D rotation; a fallback was used."""


@dataclass(frozen=True)
class ControlHandles:
    """Pinned joints and where they should go.

    ``joints`` are skeleton joint indices (distinct); ``targets`` are the
    corresponding world-space goal positions. Rest positions are looked up
    from whatever skeleton the solve runs against.
    """

    joints: np.ndarray  # (h,) joint indices
    targets: np.ndarray  # (h, 3) goal positions

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.int64).reshape(-1)
        targets = np.asarray(self.targets, dtype=float).reshape(-1, 3)
        if len(joints) == 0:
            raise ValueError("at least one handle is required")
        if len(joints) != len(targets):
            raise ValueError("handle joints and targets must pair up")
        if len(np.unique(joints)) != len(joints):
            raise ValueError("handle joint indices must be distinct")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "targets", targets)

    @property
    def n_handles(self) -> int:
        return len(self.joints)

    def to_jsonable(self) -> list:
        return [[int(j), [float(c) for c in t]] for j, t in zip(self.joints, self.targets)]

    @classmethod
    def from_jsonable(cls, data: list) -> "ControlHandles":
        try:
            joints = [int(entry[0]) for entry in data]
            targets = [[float(c) for c in entry[1]] for entry in data]
        except (TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"malformed handle list: {exc}") from exc
        return cls(joints=np.array(joints), targets=np.array(targets))


@dataclass(frozen=True)
class DeformationCache:
    """Per-joint rigid transform and the intermediates worth keeping.

    For joint j the deformation maps x to rotation_j (x - p_star_j) + q_star_j,
    equivalently rotation_j x + translation_j.
    """

    p_star: np.ndarray  # (j, 3) weighted handle rest centroids
    q_star: np.ndarray  # (j, 3) weighted handle target centroids
    quaternions: np.ndarray  # (j, 4) unit, w >= 0
    rotation_vectors: np.ndarray  # (j, 3) axis * angle, |.| in [0, pi]
    translations: np.ndarray  # (j, 3) q_star - R p_star

    @property
    def n_joints(self) -> int:
        return len(self.p_star)

    def rotation_matrices(self) -> np.ndarray:
        return quats_to_matrices(self.quaternions)

    def is_identity(self) -> bool:
        return bool(
            np.all(self.quaternions == IDENTITY_QUAT) and np.all(self.translations == 0.0)
        )

    def transform_joint_points(self, points: np.ndarray) -> np.ndarray:
        """Apply joint j's transform to points[j] for every j at once."""
        if self.is_identity():
            return np.array(points, dtype=float)
        rel = points - self.p_star
        return np.einsum("jab,jb->ja", self.rotation_matrices(), rel) + self.q_star


@dataclass(frozen=True)
class Pose:
    """One solved posture: the handles that drove it, the per-joint cache,
    and where every joint landed."""

    handles: ControlHandles
    cache: DeformationCache
    deformed_joints: np.ndarray  # (j, 3)


def _fallback_rotation(p_hat, q_hat, w):
    """Rotation for handle sets that do not span a plane.

    Collinear rest handles only define one direction; take the weighted
    least-squares image of that direction in the targets and use the minimal
    rotation between the two (the in-line spin stays zero).
    """
    cov = (w[:, None] * p_hat).T @ p_hat
    evals, evecs = jacobi_eigh(cov)
    if evals[0] <= 0.0:
        return IDENTITY_QUAT.copy()
    axis = evecs[:, 0]
    coords = p_hat @ axis  # signed positions of handles along the rest line
    image = (w * coords) @ q_hat
    norm = math.sqrt(float(image @ image))
    if norm < 1e-14:
        return IDENTITY_QUAT.copy()
    return rotation_between(axis, image / norm)


def solve_joint_transforms(
    skeleton: Skeleton, handles: ControlHandles, alpha: float = 2.0
) -> DeformationCache:
    """Fit one rigid transform per joint to the handle displacements.

    Handle i influences joint j with weight 1 / (path(j, i)^(2 alpha) + eps),
    so a handle fully owns its own joint and fades along the tree. Per joint:
    weighted centroids of rest and target handle positions, then the rotation
    maximizing weighted alignment of the centered pairs (determinant +1).
    Degenerate handle sets (a single handle, or collinear rests) fall back to
    pure translation / minimal rotation and raise DegenerateRotationWarning.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if np.any(handles.joints >= skeleton.n_joints) or np.any(handles.joints < 0):
        raise ValueError("handle joint index out of range for this skeleton")

    rest = skeleton.joints[handles.joints]  # (h, 3)
    targets = handles.targets
    n = skeleton.n_joints
    h = handles.n_handles

    dists = skeleton.path_length_matrix[:, handles.joints]  # (n, h)
    weights = 1.0 / (dists ** (2.0 * alpha) + _EPS)
    weights = weights / weights.sum(axis=1, keepdims=True)

    p_star = weights @ rest
    q_star = weights @ targets

    if np.array_equal(targets, rest):
        # nothing moved: make the identity exact rather than solver-noise small
        return DeformationCache(
            p_star=p_star,
            q_star=q_star,
            quaternions=np.tile(IDENTITY_QUAT, (n, 1)),
            rotation_vectors=np.zeros((n, 3)),
            translations=np.zeros((n, 3)),
        )

    if h == 1:
        quats = np.tile(IDENTITY_QUAT, (n, 1))
        warnings.warn(
            "single handle: rotations fixed to identity (translation only)",
            DegenerateRotationWarning,
            stacklevel=2,
        )
    else:
        quats = np.empty((n, 4))
        warned = False
        for j in range(n):
            w = weights[j]
            p_hat = rest - p_star[j]
            q_hat = targets - q_star[j]
            cov = (w[:, None] * p_hat).T @ p_hat
            evals, _ = jacobi_eigh(cov)
            if evals[1] <= _COLLINEAR_RATIO * max(evals[0], 0.0):
                quats[j] = _fallback_rotation(p_hat, q_hat, w)
                if not warned:
                    warnings.warn(
                        "handles are collinear: in-line spin is unconstrained, "
                        "using the minimal rotation",
                        DegenerateRotationWarning,
                        stacklevel=2,
                    )
                    warned = True
            else:
                quats[j] = weighted_rigid_quat(p_hat, q_hat, w)

    rotvecs = np.array([quat_to_rotvec(q) for q in quats])
    rotations = quats_to_matrices(quats)
    translations = q_star - np.einsum("jab,jb->ja", rotations, p_star)
    return DeformationCache(
        p_star=p_star,
        q_star=q_star,
        quaternions=quats,
        rotation_vectors=rotvecs,
        translations=translations,
    )


def solve_pose(skeleton: Skeleton, handles: ControlHandles, alpha: float = 2.0) -> Pose:
    """solve_joint_transforms plus the deformed joint positions, bundled."""
    cache = solve_joint_transforms(skeleton, handles, alpha)
    return Pose(
        handles=handles,
        cache=cache,
        deformed_joints=cache.transform_joint_points(skeleton.joints),
    )


def blend_vertices(mesh: Mesh, binding: SkinBinding, cache: DeformationCache) -> Mesh:
    """Linear blend skinning: each vertex takes the weight-blended mix of its
    influencing joints' rigid transforms. The face list is shared, untouched."""
    if binding.n_vertices != mesh.n_vertices:
        raise ValueError("binding was built for a different vertex count")
    if binding.joint_indices.size and int(binding.joint_indices.max()) >= cache.n_joints:
        raise ValueError("cache does not cover all joints referenced by the binding")
    if cache.is_identity():
        return mesh.with_vertices(mesh.vertices.copy())

    rotations = cache.rotation_matrices()  # (j, 3, 3)
    idx = binding.joint_indices  # (n, k)
    w = binding.joint_weights  # (n, k)
    blended_r = np.einsum("nk,nkab->nab", w, rotations[idx])
    blended_t = np.einsum("nk,nkb->nb", w, cache.translations[idx])
    new_vertices = np.einsum("nab,nb->na", blended_r, mesh.vertices) + blended_t
    return mesh.with_vertices(new_vertices)


def deform(
    mesh: Mesh,
    skeleton: Skeleton,
    binding: SkinBinding,
    handles: ControlHandles,
    *,
    config=None,
    alpha: float = 2.0,
    decompose: bool = True,
):
    """Full deformation: solve joint transforms, check for over-threshold
    joint rotations, then either blend once or apply the rotation in steps.

    Returns (deformed mesh, pose, distortion report). The mesh keeps the
    input's coordinate frame and exact face list.
    """
    from .distortion import (
        DetectorConfig,
        DistortionReport,
        apply_decomposed,
        decompose_rotation,
        joint_rotation_angles,
        measure_distortion,
    )

    if config is None:
        config = DetectorConfig()
    pose = solve_pose(skeleton, handles, alpha)
    angles = joint_rotation_angles(pose.cache)
    flagged = frozenset(int(j) for j in np.flatnonzero(angles > config.angle_threshold))

    if decompose and flagged:
        steps = decompose_rotation(handles, skeleton, angles, config, alpha=alpha)
        out_mesh, report = apply_decomposed(
            mesh, skeleton, binding, steps, config=config, alpha=alpha
        )
        # the report's angles/flags describe the requested end pose, which is
        # what triggered decomposition, not any intermediate step
        report = DistortionReport(
            global_distortion=report.global_distortion,
            per_joint_angle={int(j): float(a) for j, a in enumerate(angles)},
            flagged_joints=flagged,
            per_region_distortion=report.per_region_distortion,
            steps_used=report.steps_used,
        )
        return out_mesh, pose, report

    out_mesh = blend_vertices(mesh, binding, pose.cache)
    global_d, per_bone = measure_distortion(mesh, out_mesh, binding)
    report = DistortionReport(
        global_distortion=global_d,
        per_joint_angle={int(j): float(a) for j, a in enumerate(angles)},
        flagged_joints=flagged,
        per_region_distortion=per_bone,
        steps_used=1,
    )
    return out_mesh, pose, report
