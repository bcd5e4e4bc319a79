"""Surface-bending change measurement and large-rotation decomposition.

Linear blending keeps faces attached but shears them when a joint turns far;
the visible symptom is a change in how sharply the surface bends around each
vertex. This module scores that change (area-weighted curviness difference),
flags joints whose solved rotation exceeds a threshold, and — instead of one
big jump — replays an over-threshold pose as several smaller solves, each
against the skeleton advanced by the previous step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .deform import ControlHandles, DeformationCache, blend_vertices, solve_joint_transforms
from .linalg import IDENTITY_QUAT, quat_mul, quat_pow, quat_to_rotvec, quats_to_matrices
from .mesh import Mesh, vertex_areas, vertex_curviness
from .skinning import SkinBinding
from .skeleton import Skeleton

__all__ = [
    "DetectorConfig",
    "DistortionReport",
    "TopologyMismatchError",
    "measure_distortion",
    "joint_rotation_angles",
    "decompose_rotation",
    "apply_decomposed",
]


class TopologyMismatchError(ValueError):
    """Rest and deformed meshes do not share a face list."""


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds for the large-rotation check.

    ``distortion_tolerance`` is a reporting aid (how much curviness change
    counts as noticeable); when None it resolves to 0.15 x the rest mesh's
    mean curviness via :meth:`resolved_tolerance`. Flagging itself is purely
    angle-based.
    """

    angle_threshold: float = math.pi / 3.0
    max_step_angle: float = math.pi / 6.0
    distortion_tolerance: float | None = None

    def __post_init__(self):
        if not (0.0 < self.max_step_angle <= self.angle_threshold):
            raise ValueError(
                "max_step_angle must be in (0, angle_threshold], got "
                f"{self.max_step_angle} vs {self.angle_threshold}"
            )

    def resolved_tolerance(self, rest: Mesh) -> float:
        if self.distortion_tolerance is not None:
            return float(self.distortion_tolerance)
        return 0.15 * float(np.mean(vertex_curviness(rest)))


@dataclass(frozen=True)
class DistortionReport:
    """What a deformation did to the surface and which joints turned hard."""

    global_distortion: float
    per_joint_angle: dict  # joint index -> radians in [0, pi]
    flagged_joints: frozenset
    per_region_distortion: dict = field(default_factory=dict)  # bone index -> score
    steps_used: int = 1

    def __post_init__(self):
        if self.global_distortion < 0.0:
            raise ValueError("distortion cannot be negative")
        if self.steps_used < 1:
            raise ValueError("at least one step is always used")
        object.__setattr__(self, "flagged_joints", frozenset(self.flagged_joints))

    def to_jsonable(self) -> dict:
        return {
            "global_distortion": float(self.global_distortion),
            "per_joint_angle_deg": {
                str(j): math.degrees(a) for j, a in sorted(self.per_joint_angle.items())
            },
            "flagged_joints": sorted(int(j) for j in self.flagged_joints),
            "per_region_distortion": {
                str(b): float(v) for b, v in sorted(self.per_region_distortion.items())
            },
            "steps_used": int(self.steps_used),
        }

    @classmethod
    def from_jsonable(cls, d: dict) -> "DistortionReport":
        return cls(
            global_distortion=float(d["global_distortion"]),
            per_joint_angle={
                int(j): math.radians(a) for j, a in d["per_joint_angle_deg"].items()
            },
            flagged_joints=frozenset(int(j) for j in d["flagged_joints"]),
            per_region_distortion={
                int(b): float(v) for b, v in d["per_region_distortion"].items()
            },
            steps_used=int(d["steps_used"]),
        )


def measure_distortion(rest: Mesh, deformed: Mesh, binding: SkinBinding):
    """Area-weighted mean |curviness change| per vertex, plus a per-bone split.

    Weights are the rest mesh's per-vertex areas, so the score does not drift
    just because the deformation stretched some faces. Returns
    ``(global_score, {bone: score})`` over bones that own at least one vertex.
    """
    if rest.n_vertices != deformed.n_vertices or not np.array_equal(rest.faces, deformed.faces):
        raise TopologyMismatchError("rest and deformed meshes must share the same face list")
    if binding.n_vertices != rest.n_vertices:
        raise TopologyMismatchError("binding was built for a different vertex count")

    diff = np.abs(vertex_curviness(deformed) - vertex_curviness(rest))
    areas = vertex_areas(rest)
    total = float(areas.sum())
    global_score = float((areas * diff).sum() / total) if total > 0 else 0.0

    per_bone = {}
    for bone in np.unique(binding.bone_of_vertex):
        mask = binding.bone_of_vertex == bone
        bone_area = float(areas[mask].sum())
        per_bone[int(bone)] = (
            float((areas[mask] * diff[mask]).sum() / bone_area) if bone_area > 0 else 0.0
        )
    return global_score, per_bone


def joint_rotation_angles(cache: DeformationCache) -> np.ndarray:
    """Solved rotation angle per joint in radians, each in [0, pi]."""
    return np.linalg.norm(cache.rotation_vectors, axis=1)


def decompose_rotation(
    handles: ControlHandles,
    rest: Skeleton,
    angles: np.ndarray,
    config: DetectorConfig,
    *,
    alpha: float = 2.0,
) -> list:
    """Split an over-threshold pose into equal-fraction intermediate poses.

    The step count is ceil(max flagged angle / max_step_angle). Each handle
    travels from its rest position to its target along its own solved rigid
    motion: the rotation slerped (about the handle joint's weighted rest
    centroid) and the leftover translation scaled linearly, both at k/n. The
    last step is the original target array itself, bit for bit.
    """
    angles = np.asarray(angles, dtype=float)
    over = angles[angles > config.angle_threshold]
    if len(over) == 0:
        raise ValueError("no joint exceeds the angle threshold; apply the pose in one pass")
    n_steps = math.ceil(float(over.max()) / config.max_step_angle)

    cache = solve_joint_transforms(rest, handles, alpha)
    rotations = cache.quaternions[handles.joints]  # (h, 4) each handle's own joint
    centers = cache.p_star[handles.joints]  # (h, 3)
    rest_pos = rest.joints[handles.joints]
    arms = rest_pos - centers
    full = np.array(
        [quats_to_matrices(rotations[i : i + 1])[0] @ arms[i] for i in range(len(arms))]
    )
    residual = handles.targets - (full + centers)  # translation left after the spin

    steps = []
    for k in range(1, n_steps + 1):
        if k == n_steps:
            steps.append(ControlHandles(handles.joints.copy(), handles.targets.copy()))
            break
        s = k / n_steps
        part = np.array(
            [
                quats_to_matrices(quat_pow(rotations[i], s)[None])[0] @ arms[i]
                for i in range(len(arms))
            ]
        )
        steps.append(ControlHandles(handles.joints.copy(), part + centers + s * residual))
    return steps


def apply_decomposed(
    mesh: Mesh,
    skeleton: Skeleton,
    binding: SkinBinding,
    steps: list,
    *,
    config: DetectorConfig | None = None,
    alpha: float = 2.0,
):
    """Blend a pose in increments, re-solving against the advanced skeleton.

    Step k's handles are solved against the skeleton whose joints were moved
    by steps 1..k-1, and blended onto the step k-1 mesh, so every solve sees
    only a small rotation. Returns the final mesh and a report whose angles
    are the composed per-joint rotations and whose distortion is measured
    against the original rest mesh.
    """
    if len(steps) < 2:
        raise ValueError("decomposed application needs at least 2 steps")
    if config is None:
        config = DetectorConfig()

    current_mesh = mesh
    current_sk = skeleton
    composed = [IDENTITY_QUAT.copy() for _ in range(skeleton.n_joints)]
    for step_handles in steps:
        cache = solve_joint_transforms(current_sk, step_handles, alpha)
        current_mesh = blend_vertices(current_mesh, binding, cache)
        composed = [quat_mul(cache.quaternions[j], composed[j]) for j in range(len(composed))]
        current_sk = current_sk.with_joints(cache.transform_joint_points(current_sk.joints))

    total_angles = np.array([np.linalg.norm(quat_to_rotvec(q)) for q in composed])
    flagged = frozenset(int(j) for j in np.flatnonzero(total_angles > config.angle_threshold))
    global_score, per_bone = measure_distortion(mesh, current_mesh, binding)
    report = DistortionReport(
        global_distortion=global_score,
        per_joint_angle={int(j): float(a) for j, a in enumerate(total_angles)},
        flagged_joints=flagged,
        per_region_distortion=per_bone,
        steps_used=len(steps),
    )
    return current_mesh, report
