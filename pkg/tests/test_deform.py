import math
import warnings

import numpy as np
import pytest

from conftest import find_knee, knee_bend_handles, random_rotation
from rigforge.deform import (
    ControlHandles,
    DegenerateRotationWarning,
    blend_vertices,
    deform,
    solve_joint_transforms,
    solve_pose,
)
from rigforge.linalg import quat_to_matrix, quats_to_matrices
from rigforge.skeleton import Skeleton


def line_skeleton(*xs):
    joints = np.array([[x, 0.0, 0.0] for x in xs])
    bones = np.array([[i, i + 1] for i in range(len(xs) - 1)])
    return Skeleton(joints=joints, bones=bones, root=0)


def all_joint_handles(skeleton, targets=None):
    t = skeleton.joints.copy() if targets is None else np.asarray(targets, dtype=float)
    return ControlHandles(np.arange(skeleton.n_joints), t)


def quiet_solve(skeleton, handles, alpha=2.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRotationWarning)
        return solve_joint_transforms(skeleton, handles, alpha)


class TestControlHandles:
    def test_requires_at_least_one(self):
        with pytest.raises(ValueError):
            ControlHandles(np.array([], dtype=int), np.zeros((0, 3)))

    def test_requires_pairing(self):
        with pytest.raises(ValueError):
            ControlHandles(np.array([0, 1]), np.zeros((3, 3)))

    def test_rejects_duplicate_joints(self):
        with pytest.raises(ValueError):
            ControlHandles(np.array([1, 1]), np.zeros((2, 3)))

    def test_jsonable_roundtrip(self):
        h = ControlHandles(np.array([2, 0]), np.array([[1.0, 2.0, 3.0], [0.5, 0.0, -1.0]]))
        back = ControlHandles.from_jsonable(h.to_jsonable())
        np.testing.assert_array_equal(back.joints, h.joints)
        np.testing.assert_array_equal(back.targets, h.targets)

    def test_from_jsonable_rejects_garbage(self):
        with pytest.raises(ValueError):
            ControlHandles.from_jsonable([[0, "not a point"]])


class TestSolveJointTransforms:
    def test_zero_displacement_is_exact_identity(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        cache = solve_joint_transforms(sk, all_joint_handles(sk))
        assert cache.is_identity()
        assert np.all(cache.rotation_vectors == 0.0)
        np.testing.assert_array_equal(cache.transform_joint_points(sk.joints), sk.joints)

    def test_rigid_motion_reproduced_at_joints(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        rng = np.random.default_rng(3)
        rot = random_rotation(rng)
        t = rng.normal(size=3)
        cache = solve_joint_transforms(sk, all_joint_handles(sk, sk.joints @ rot.T + t))
        for rm in cache.rotation_matrices():
            np.testing.assert_allclose(rm, rot, atol=1e-6)
        np.testing.assert_allclose(cache.translations, np.tile(t, (sk.n_joints, 1)), atol=1e-6)
        np.testing.assert_allclose(
            cache.transform_joint_points(sk.joints), sk.joints @ rot.T + t, atol=1e-6
        )

    def test_single_handle_translates_everything(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        t = np.array([0.3, -0.1, 0.7])
        handles = ControlHandles(np.array([0]), (sk.joints[0] + t)[None])
        with pytest.warns(DegenerateRotationWarning):
            cache = solve_joint_transforms(sk, handles)
        assert np.all(cache.quaternions[:, 0] == 1.0)
        np.testing.assert_allclose(
            cache.transform_joint_points(sk.joints), sk.joints + t, atol=1e-12
        )

    def test_collinear_handles_use_minimal_rotation(self):
        sk = line_skeleton(0.0, 1.0, 2.0)
        rot = quat_to_matrix(
            np.array([math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4)])
        )  # 90 degrees about z
        targets = sk.joints @ rot.T
        with pytest.warns(DegenerateRotationWarning):
            cache = solve_joint_transforms(sk, all_joint_handles(sk, targets))
        # every joint's solved rotation must map the rest line onto the target line
        for rm in cache.rotation_matrices():
            np.testing.assert_allclose(rm @ np.array([1.0, 0, 0]), [0, 1, 0], atol=1e-9)
        np.testing.assert_allclose(cache.transform_joint_points(sk.joints), targets, atol=1e-9)

    def test_two_handles_fall_back(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        handles = ControlHandles(np.array([0, 1]), sk.joints[[0, 1]] + np.array([0.1, 0, 0]))
        with pytest.warns(DegenerateRotationWarning):
            solve_joint_transforms(sk, handles)

    def test_cache_invariants(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        rng = np.random.default_rng(11)
        targets = sk.joints + 0.25 * rng.normal(size=sk.joints.shape)
        cache = solve_joint_transforms(sk, all_joint_handles(sk, targets))
        norms = np.linalg.norm(cache.quaternions, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)
        angles = np.linalg.norm(cache.rotation_vectors, axis=1)
        assert np.all(angles >= 0.0) and np.all(angles <= math.pi + 1e-12)
        recomputed = cache.q_star - np.einsum(
            "jab,jb->ja", quats_to_matrices(cache.quaternions), cache.p_star
        )
        np.testing.assert_allclose(cache.translations, recomputed, atol=1e-9)

    def test_handle_pins_its_own_joint(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        targets = sk.joints.copy()
        targets[4] += np.array([0.0, 0.2, 0.1])
        pose = solve_pose(sk, all_joint_handles(sk, targets))
        np.testing.assert_allclose(pose.deformed_joints[4], targets[4], atol=1e-5)

    def test_alpha_must_be_positive(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        with pytest.raises(ValueError):
            solve_joint_transforms(sk, all_joint_handles(sk), alpha=-1.0)

    def test_handle_index_out_of_range(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        handles = ControlHandles(np.array([sk.n_joints]), np.zeros((1, 3)))
        with pytest.raises(ValueError):
            solve_joint_transforms(sk, handles)


class TestBlendVertices:
    def test_identity_cache_is_bitwise(self, knee_rig):
        cache = solve_joint_transforms(knee_rig.skeleton, all_joint_handles(knee_rig.skeleton))
        out = blend_vertices(knee_rig.mesh, knee_rig.binding, cache)
        np.testing.assert_array_equal(out.vertices, knee_rig.mesh.vertices)
        assert out.faces is knee_rig.mesh.faces

    def test_rigid_motion_reproduced_at_vertices(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        rng = np.random.default_rng(7)
        rot = random_rotation(rng)
        t = rng.normal(size=3)
        cache = solve_joint_transforms(sk, all_joint_handles(sk, sk.joints @ rot.T + t))
        out = blend_vertices(humanoid_rig.mesh, humanoid_rig.binding, cache)
        expected = humanoid_rig.mesh.vertices @ rot.T + t
        scale = humanoid_rig.mesh.diameter
        assert np.abs(out.vertices - expected).max() / scale < 1e-6

    def test_knee_bend_is_local(self, knee_rig):
        sk = knee_rig.skeleton
        knee = find_knee(knee_rig)
        pose = solve_pose(sk, knee_bend_handles(knee_rig, 30.0))
        out = blend_vertices(knee_rig.mesh, knee_rig.binding, pose.cache)
        v = knee_rig.mesh.vertices
        disp = np.linalg.norm(out.vertices - v, axis=1)

        proximal = v[:, 0] < sk.joints[1][0]  # hip-cap region, far from the bend
        assert disp[proximal].mean() < 6e-3

        distal = v[:, 0] > sk.joints[knee][0] + 0.4
        rot = quat_to_matrix(
            np.array([math.cos(math.radians(15)), 0, 0, math.sin(math.radians(15))])
        )
        oracle = (v[distal] - sk.joints[knee]) @ rot.T + sk.joints[knee]
        rel0 = v[distal] - sk.joints[knee]
        rel1 = out.vertices[distal] - sk.joints[knee]
        cosang = np.einsum("ij,ij->i", rel0, rel1)
        cosang /= np.linalg.norm(rel0, axis=1) * np.linalg.norm(rel1, axis=1)
        apparent = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        assert 27.0 < apparent.mean() < 30.5
        assert np.linalg.norm(out.vertices[distal] - oracle, axis=1).mean() < disp[
            distal
        ].mean()  # closer to the rotated oracle than to rest

    def test_translation_equivariance(self, humanoid_rig):
        sk = humanoid_rig.skeleton
        rng = np.random.default_rng(23)
        targets = sk.joints + 0.2 * rng.normal(size=sk.joints.shape)
        t = np.array([1.25, -0.5, 2.0])
        out_a = blend_vertices(
            humanoid_rig.mesh,
            humanoid_rig.binding,
            solve_joint_transforms(sk, all_joint_handles(sk, targets)),
        )
        out_b = blend_vertices(
            humanoid_rig.mesh,
            humanoid_rig.binding,
            solve_joint_transforms(sk, all_joint_handles(sk, targets + t)),
        )
        assert np.abs(out_b.vertices - (out_a.vertices + t)).max() < 1e-9

    def test_vertex_count_mismatch_rejected(self, knee_rig, humanoid_rig):
        cache = solve_joint_transforms(knee_rig.skeleton, all_joint_handles(knee_rig.skeleton))
        with pytest.raises(ValueError):
            blend_vertices(humanoid_rig.mesh, knee_rig.binding, cache)

    def test_cache_joint_coverage_checked(self, knee_rig):
        small = line_skeleton(0.0, 1.0)
        cache = quiet_solve(small, all_joint_handles(small))
        with pytest.raises(ValueError):
            blend_vertices(knee_rig.mesh, knee_rig.binding, cache)


class TestDeform:
    def test_identity_pose(self, knee_rig):
        handles = all_joint_handles(knee_rig.skeleton)
        out, pose, report = deform(knee_rig.mesh, knee_rig.skeleton, knee_rig.binding, handles)
        np.testing.assert_array_equal(out.vertices, knee_rig.mesh.vertices)
        np.testing.assert_array_equal(out.faces, knee_rig.mesh.faces)
        assert report.global_distortion == 0.0
        assert report.flagged_joints == frozenset()
        assert report.steps_used == 1
        np.testing.assert_array_equal(pose.deformed_joints, knee_rig.skeleton.joints)

    def test_large_bend_flags_and_decomposes(self, knee_rig):
        knee = find_knee(knee_rig)
        out, pose, report = deform(
            knee_rig.mesh, knee_rig.skeleton, knee_rig.binding, knee_bend_handles(knee_rig, 120.0)
        )
        assert report.steps_used >= 2
        assert knee + 1 in report.flagged_joints  # the swung side turned > 60 degrees
        assert report.per_joint_angle[knee + 1] > math.pi / 3
        assert out.faces is knee_rig.mesh.faces
        assert out.n_vertices == knee_rig.mesh.n_vertices

    def test_small_bend_single_pass(self, knee_rig):
        out, pose, report = deform(
            knee_rig.mesh, knee_rig.skeleton, knee_rig.binding, knee_bend_handles(knee_rig, 20.0)
        )
        assert report.flagged_joints == frozenset()
        assert report.steps_used == 1
        assert report.global_distortion > 0.0

    def test_no_decompose_forces_single_pass(self, knee_rig):
        out, pose, report = deform(
            knee_rig.mesh,
            knee_rig.skeleton,
            knee_rig.binding,
            knee_bend_handles(knee_rig, 120.0),
            decompose=False,
        )
        assert report.steps_used == 1
        assert len(report.flagged_joints) > 0

    def test_decomposition_reduces_distortion(self, knee_rig):
        args = (knee_rig.mesh, knee_rig.skeleton, knee_rig.binding)
        for deg in (90.0, 120.0, 150.0):
            handles = knee_bend_handles(knee_rig, deg)
            _, _, single = deform(*args, handles, decompose=False)
            _, _, multi = deform(*args, handles, decompose=True)
            assert multi.steps_used >= 2
            assert multi.global_distortion <= single.global_distortion

    def test_solved_rotation_beats_random_sampling(self):
        # weighted alignment error of the solved rotation vs brute-force search
        rng = np.random.default_rng(41)
        sk = Skeleton(
            joints=rng.normal(size=(5, 3)),
            bones=np.array([[0, 1], [1, 2], [2, 3], [3, 4]]),
            root=0,
        )
        for trial in range(5):
            targets = sk.joints + 0.4 * rng.normal(size=(5, 3))
            cache = solve_joint_transforms(sk, all_joint_handles(sk, targets))
            j = int(rng.integers(sk.n_joints))
            dists = sk.path_length_matrix[j]
            w = 1.0 / (dists ** 4.0 + 1e-8)
            w /= w.sum()
            p_hat = sk.joints - cache.p_star[j]
            q_hat = targets - cache.q_star[j]

            def err(rm):
                return float((w * ((p_hat @ rm.T - q_hat) ** 2).sum(axis=1)).sum())

            best_random = min(err(random_rotation(rng)) for _ in range(1000))
            assert err(cache.rotation_matrices()[j]) <= best_random + 1e-12
