"""One-call setup stage: mesh in, ready-to-deform rig out.

Runs the full chain — closedness check, principal frame, cross-section
slicing, part chains, skeleton, binding, weights — and maps the skeleton back
into the mesh's original coordinates, so deformation never needs the frame.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frame import compute_frame, points_from_frame, to_frame
from .mesh import Mesh, validate_topology
from .rigfile import Rig, mesh_checksum
from .skeleton import Skeleton, build_skeleton
from .skinning import bind_vertices, compute_weights
from .slicer import OpenMeshError, SliceConfig, classify_parts, slice_mesh

__all__ = ["RigConfig", "build_rig"]


@dataclass(frozen=True)
class RigConfig:
    """Knobs for the setup stage; defaults match the individual modules."""

    slice_count: int = 32
    ray_count: int = 64
    mode: str = "parity-refined"
    angle_tolerance: float = 10.0  # degrees of turn a joint must earn to survive
    weight_alpha: float = 2.0
    smooth_centers: bool = False

    def slice_config(self) -> SliceConfig:
        return SliceConfig(
            slice_count=self.slice_count, ray_count=self.ray_count, mode=self.mode
        )


def build_rig(mesh: Mesh, config: RigConfig | None = None) -> Rig:
    """Build the complete rig for a closed mesh, in the mesh's own coordinates."""
    if config is None:
        config = RigConfig()

    report = validate_topology(mesh)
    if not report.is_closed:
        raise OpenMeshError(
            f"rigging requires a closed mesh ({report.boundary_edge_count} boundary edges)"
        )

    frame = compute_frame(mesh)
    aligned = to_frame(mesh, frame)
    slices = slice_mesh(aligned, config.slice_config())
    chains = classify_parts(slices)
    aligned_skeleton = build_skeleton(
        chains, aligned, angle_tolerance=config.angle_tolerance, smooth=config.smooth_centers
    )

    skeleton = Skeleton(
        joints=points_from_frame(aligned_skeleton.joints, frame),
        bones=aligned_skeleton.bones.copy(),
        root=aligned_skeleton.root,
        joint_labels=aligned_skeleton.joint_labels,
    )
    binding = compute_weights(
        mesh, skeleton, bind_vertices(mesh, skeleton), alpha=config.weight_alpha
    )
    return Rig(
        frame=frame,
        skeleton=skeleton,
        binding=binding,
        source_checksum=mesh_checksum(mesh),
    )
