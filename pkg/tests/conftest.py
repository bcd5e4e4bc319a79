from types import SimpleNamespace

import numpy as np
import pytest

from rigforge import creation
from rigforge.frame import compute_frame, to_frame
from rigforge.skeleton import build_skeleton
from rigforge.skinning import bind_vertices, compute_weights
from rigforge.slicer import SliceConfig, classify_parts, slice_mesh


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix via normalized quaternion (oracle helper)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@pytest.fixture(scope="session")
def knee_mesh():
    return creation.knee_fixture()


@pytest.fixture(scope="session")
def humanoid_mesh():
    return creation.humanoid_fixture()


@pytest.fixture(scope="session")
def y_tube_mesh():
    return creation.y_tube_fixture()


@pytest.fixture(scope="session")
def cylinder_mesh():
    return creation.cylinder(length=2.0, radius=0.3, rings=16, segments=24)


@pytest.fixture(scope="session")
def sphere_mesh():
    return creation.uv_sphere(radius=1.0, rings=12, segments=24)


def _sliced(mesh):
    """Aligned mesh + default-mode slices + chains, bundled for reuse."""
    frame = compute_frame(mesh)
    aligned = to_frame(mesh, frame)
    slices = slice_mesh(aligned, SliceConfig())
    return SimpleNamespace(
        mesh=mesh,
        frame=frame,
        aligned=aligned,
        slices=slices,
        chains=classify_parts(slices),
    )


@pytest.fixture(scope="session")
def knee_parts(knee_mesh):
    return _sliced(knee_mesh)


@pytest.fixture(scope="session")
def humanoid_parts(humanoid_mesh):
    return _sliced(humanoid_mesh)


@pytest.fixture(scope="session")
def y_tube_parts(y_tube_mesh):
    return _sliced(y_tube_mesh)


@pytest.fixture(scope="session")
def cylinder_parts(cylinder_mesh):
    return _sliced(cylinder_mesh)


@pytest.fixture(scope="session")
def parallel_parts():
    return _sliced(creation.parallel_cylinders_fixture())


def _rigged(parts):
    """Parts bundle extended with a skeleton and weighted binding (aligned coords)."""
    skeleton = build_skeleton(parts.chains, parts.aligned)
    binding = compute_weights(parts.aligned, skeleton, bind_vertices(parts.aligned, skeleton))
    return SimpleNamespace(
        mesh=parts.aligned, frame=parts.frame, skeleton=skeleton, binding=binding
    )


@pytest.fixture(scope="session")
def knee_rig(knee_parts):
    return _rigged(knee_parts)


@pytest.fixture(scope="session")
def humanoid_rig(humanoid_parts):
    return _rigged(humanoid_parts)


@pytest.fixture(scope="session")
def cylinder_rig(cylinder_parts):
    return _rigged(cylinder_parts)


def find_knee(rig) -> int:
    """Joint of the knee-fixture rig nearest the modeled knee point (1, 0, 0)."""
    knee_pos = rig.frame.axes @ (np.array([1.0, 0.0, 0.0]) - rig.frame.center)
    return int(np.argmin(np.linalg.norm(rig.skeleton.joints - knee_pos, axis=1)))


def knee_bend_handles(rig, angle_deg: float):
    """Handle set pinning every joint, with the joints past the knee swung
    about it by the given angle in the bend plane."""
    from rigforge.deform import ControlHandles
    from rigforge.linalg import quat_to_matrix, rotvec_to_quat

    sk = rig.skeleton
    knee = find_knee(rig)
    rot = quat_to_matrix(rotvec_to_quat(np.array([0.0, 0.0, 1.0]) * np.radians(angle_deg)))
    targets = sk.joints.copy()
    for j in range(knee + 1, sk.n_joints):
        targets[j] = rot @ (sk.joints[j] - sk.joints[knee]) + sk.joints[knee]
    return ControlHandles(np.arange(sk.n_joints), targets)
