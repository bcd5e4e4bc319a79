"""rigforge: skeleton extraction, skinning, and handle-driven deformation for
closed triangle meshes, with large-rotation detection and stepwise blending.

Typical use::

    from rigforge import build_rig, deform, ControlHandles

    rig = build_rig(mesh)                      # one-time setup stage
    out, pose, report = deform(mesh, rig.skeleton, rig.binding, handles)
"""

from .deform import (
    ControlHandles,
    DeformationCache,
    DegenerateRotationWarning,
    Pose,
    blend_vertices,
    deform,
    solve_joint_transforms,
    solve_pose,
)
from .distortion import (
    DetectorConfig,
    DistortionReport,
    TopologyMismatchError,
    apply_decomposed,
    decompose_rotation,
    joint_rotation_angles,
    measure_distortion,
)
from .frame import DegenerateFrameError, PrincipalFrame, compute_frame, from_frame, to_frame
from .mesh import Mesh, MeshError, load_mesh, save_mesh, validate_topology
from .pipeline import RigConfig, build_rig
from .rigfile import (
    ChecksumMismatchError,
    Rig,
    RigFileError,
    load_pose,
    load_rig,
    load_report,
    mesh_checksum,
    save_pose,
    save_rig,
    save_report,
)
from .service import DEFAULT_MAX_VERTICES, Session, SessionManager, create_app
from .skeleton import (
    DisconnectedChainError,
    Skeleton,
    SkeletonError,
    build_skeleton,
    skeleton_path_distance,
)
from .skinning import SkinBinding, bind_vertices, compute_weights, rigidity_profile
from .slicer import (
    NoInteriorError,
    OpenMeshError,
    PointGroup,
    SliceConfig,
    classify_parts,
    intersect_ray,
    refine_center,
    slice_mesh,
)

__version__ = "0.1.0"
