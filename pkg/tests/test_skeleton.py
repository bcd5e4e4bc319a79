import math
from dataclasses import replace

import numpy as np
import pytest

from rigforge.skeleton import (
    DisconnectedChainError,
    Skeleton,
    SkeletonError,
    build_skeleton,
    decimate_chain,
    skeleton_path_distance,
    smooth_centers,
)
from rigforge.slicer import RayCaster


def polyline_deviations(centers):
    """Oracle: interior turn angles (degrees) of a polyline."""
    centers = np.asarray(centers, dtype=float)
    out = []
    for i in range(1, len(centers) - 1):
        a = centers[i] - centers[i - 1]
        b = centers[i + 1] - centers[i]
        cosang = np.clip(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0)
        out.append(math.degrees(math.acos(cosang)))
    return out


class TestDecimateChain:
    def test_ten_collinear_centers_keep_endpoints(self):
        centers = np.linspace([0, 0, 0], [9, 0, 0], 10)
        kept = decimate_chain(centers)
        assert len(kept) == 2
        np.testing.assert_array_equal(kept, centers[[0, -1]])

    def test_l_shape_keeps_corner(self):
        centers = np.array(
            [[0, 0, 0], [1, 0, 0], [2, 0, 0], [2, 1, 0], [2, 2, 0]], dtype=float
        )
        kept = decimate_chain(centers)
        assert len(kept) == 3
        np.testing.assert_array_equal(kept[1], [2, 0, 0])

    def test_gentle_arc_collapses_to_endpoints(self):
        theta = np.radians(np.arange(8) * 5.0)
        centers = np.stack([np.cos(theta), np.sin(theta), np.zeros(8)], axis=1)
        assert max(polyline_deviations(centers)) < 10.0  # oracle angle loop
        assert len(decimate_chain(centers)) == 2

    def test_sharp_arc_keeps_interior(self):
        theta = np.radians(np.arange(8) * 20.0)
        centers = np.stack([np.cos(theta), np.sin(theta), np.zeros(8)], axis=1)
        assert len(decimate_chain(centers)) == 8

    def test_output_is_subsequence(self):
        rng = np.random.default_rng(2)
        centers = np.cumsum(rng.normal(size=(20, 3)), axis=0)
        kept = decimate_chain(centers)
        assert len(kept) <= len(centers)
        rows = [np.flatnonzero(np.all(centers == k, axis=1))[0] for k in kept]
        assert rows == sorted(rows)
        assert rows[0] == 0 and rows[-1] == len(centers) - 1

    def test_tolerance_monotonic(self):
        rng = np.random.default_rng(9)
        centers = np.cumsum(rng.normal(size=(15, 3)), axis=0)
        counts = [len(decimate_chain(centers, tol)) for tol in (5.0, 20.0, 60.0)]
        assert counts == sorted(counts, reverse=True)

    def test_requires_two_centers(self):
        with pytest.raises(ValueError):
            decimate_chain(np.zeros((1, 3)))


class TestSmoothCenters:
    def test_collinear_identity(self):
        # uneven spacing along a line still reproduces the input
        ts = np.array([0.0, 0.7, 1.1, 2.4, 3.0])
        centers = np.outer(ts, [1.0, 2.0, -0.5])
        out = smooth_centers(centers)
        np.testing.assert_allclose(out, centers, atol=1e-9)

    def test_short_chain_pass_through(self):
        centers = np.array([[0, 0, 0], [1, 1, 0], [2, 0, 0]], dtype=float)
        out = smooth_centers(centers)
        np.testing.assert_array_equal(out, centers)

    def test_endpoints_exact(self):
        rng = np.random.default_rng(4)
        centers = np.cumsum(rng.normal(size=(9, 3)), axis=0)
        out = smooth_centers(centers)
        np.testing.assert_array_equal(out[0], centers[0])
        np.testing.assert_array_equal(out[-1], centers[-1])

    def test_arc_stays_in_annulus(self):
        theta = np.radians([0.0, 10.0, 20.0, 30.0])
        centers = np.stack([np.cos(theta), np.sin(theta), np.zeros(4)], axis=1)
        out = smooth_centers(centers)
        radii = np.linalg.norm(out, axis=1)
        inner = math.cos(math.radians(5.0))  # chord polyline inradius
        assert np.all(radii >= inner - 1e-9)
        assert np.all(radii <= 1.0 + 1e-9)

    def test_zigzag_does_not_amplify(self):
        n = 9
        h = 0.3
        centers = np.stack(
            [np.arange(n, dtype=float), h * (-1.0) ** np.arange(n), np.zeros(n)], axis=1
        )
        out = smooth_centers(centers)
        assert np.abs(out[:, 1]).max() <= h + 1e-12

    def test_local_deviation_bounded_by_spacing(self):
        rng = np.random.default_rng(13)
        base = np.linspace([0, 0, 0], [10, 0, 0], 12)
        centers = base + 0.08 * rng.normal(size=base.shape)
        out = smooth_centers(centers)
        spacing = np.linalg.norm(np.diff(centers, axis=0), axis=1)
        local = np.minimum(
            np.concatenate([[spacing[0]], spacing]),
            np.concatenate([spacing, [spacing[-1]]]),
        )
        deviation = np.linalg.norm(out - centers, axis=1)
        assert np.all(deviation <= local)


class TestSkeletonType:
    def chain(self):
        joints = np.array([[0, 0, 0], [1, 0, 0], [3, 0, 0]], dtype=float)
        bones = np.array([[0, 1], [1, 2]])
        return Skeleton(joints=joints, bones=bones, root=0)

    def test_bone_lengths_computed(self):
        sk = self.chain()
        np.testing.assert_allclose(sk.bone_lengths, [1.0, 2.0], atol=1e-12)

    def test_bone_lengths_validated(self):
        with pytest.raises(SkeletonError):
            Skeleton(
                joints=np.array([[0, 0, 0], [1, 0, 0]], dtype=float),
                bones=np.array([[0, 1]]),
                root=0,
                bone_lengths=np.array([2.0]),
            )

    def test_wrong_bone_count_rejected(self):
        with pytest.raises(SkeletonError):
            Skeleton(
                joints=np.zeros((3, 3)),
                bones=np.array([[0, 1]]),
                root=0,
            )

    def test_disconnected_rejected(self):
        joints = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        bones = np.array([[0, 1], [0, 1], [2, 3]])
        with pytest.raises(SkeletonError):
            Skeleton(joints=joints, bones=bones, root=0)

    def test_root_out_of_range(self):
        with pytest.raises(SkeletonError):
            Skeleton(joints=np.zeros((1, 3)), bones=np.zeros((0, 2), dtype=int), root=1)

    def test_dict_roundtrip(self):
        sk = self.chain()
        back = Skeleton.from_dict(sk.to_dict())
        np.testing.assert_array_equal(back.joints, sk.joints)
        np.testing.assert_array_equal(back.bones, sk.bones)
        assert back.root == sk.root

    def test_with_joints_keeps_tree(self):
        sk = self.chain()
        moved = sk.with_joints(sk.joints + [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(moved.bones, sk.bones)
        np.testing.assert_allclose(moved.bone_lengths, sk.bone_lengths)


class TestPathDistance:
    def test_chain_sums_lengths(self):
        sk = Skeleton(
            joints=np.array([[0, 0, 0], [1, 0, 0], [3, 0, 0]], dtype=float),
            bones=np.array([[0, 1], [1, 2]]),
            root=0,
        )
        assert skeleton_path_distance(sk, 0, 2) == pytest.approx(3.0, abs=1e-12)
        assert skeleton_path_distance(sk, 2, 0) == pytest.approx(3.0, abs=1e-12)

    def test_identity_is_zero(self):
        sk = Skeleton(
            joints=np.array([[0, 0, 0], [1, 0, 0]], dtype=float),
            bones=np.array([[0, 1]]),
            root=0,
        )
        for j in range(sk.n_joints):
            assert skeleton_path_distance(sk, j, j) == 0.0

    def test_star_routes_through_hub(self):
        joints = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 2, 0], [0, 0, 3]], dtype=float
        )
        bones = np.array([[0, 1], [0, 2], [0, 3]])
        sk = Skeleton(joints=joints, bones=bones, root=0)
        assert skeleton_path_distance(sk, 1, 3) == pytest.approx(4.0, abs=1e-12)

    def test_equality_along_path(self):
        sk = Skeleton(
            joints=np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 5]], dtype=float),
            bones=np.array([[0, 1], [1, 2], [2, 3]]),
            root=0,
        )
        d = skeleton_path_distance
        assert d(sk, 0, 3) == pytest.approx(d(sk, 0, 2) + d(sk, 2, 3), abs=1e-12)

    def test_invalid_index(self):
        sk = Skeleton(
            joints=np.array([[0, 0, 0], [1, 0, 0]], dtype=float),
            bones=np.array([[0, 1]]),
            root=0,
        )
        with pytest.raises(IndexError):
            skeleton_path_distance(sk, 0, 5)


class TestBuildSkeleton:
    def test_cylinder_two_joints(self, cylinder_parts):
        sk = build_skeleton(cylinder_parts.chains, cylinder_parts.aligned)
        assert sk.n_joints == 2
        assert len(sk.bones) == 1
        assert sk.root in (0, 1)

    def test_tree_invariant(self, humanoid_parts):
        sk = build_skeleton(humanoid_parts.chains, humanoid_parts.aligned)
        assert len(sk.bones) == sk.n_joints - 1
        np.testing.assert_allclose(
            sk.bone_lengths,
            np.linalg.norm(sk.joints[sk.bones[:, 1]] - sk.joints[sk.bones[:, 0]], axis=1),
            atol=1e-9,
        )

    def test_y_tube_single_branch_joint(self, y_tube_parts):
        sk = build_skeleton(y_tube_parts.chains, y_tube_parts.aligned)
        degrees = [sk.degree(j) for j in range(sk.n_joints)]
        assert degrees.count(3) == 1
        assert max(degrees) == 3

    def test_humanoid_four_leaf_limbs(self, humanoid_parts):
        sk = build_skeleton(humanoid_parts.chains, humanoid_parts.aligned)
        labels = np.array(sk.joint_labels)
        limb_names = sorted(set(labels) - {"torso"})
        assert limb_names == ["limb_1", "limb_2", "limb_3", "limb_4"]
        for name in limb_names:
            idx = np.flatnonzero(labels == name)
            assert sk.degree(int(idx[-1])) == 1  # free end is a leaf
            head = int(idx[0])
            trunk_neighbors = [
                n for n in sk.neighbors(head) if sk.joint_labels[n] == "torso"
            ]
            assert len(trunk_neighbors) == 1  # attached to the trunk

    def test_humanoid_compact(self, humanoid_parts):
        sk = build_skeleton(humanoid_parts.chains, humanoid_parts.aligned)
        raw_centers = sum(len(c) for c in humanoid_parts.chains.chains)
        assert sk.n_joints <= 0.5 * raw_centers

    def test_knee_bend_joint_near_true_knee(self, knee_parts):
        from rigforge.frame import points_from_frame

        sk = build_skeleton(knee_parts.chains, knee_parts.aligned)
        joints = points_from_frame(sk.joints, knee_parts.frame)
        assert np.linalg.norm(joints - [1.0, 0.0, 0.0], axis=1).min() < 0.05

    def test_root_nearest_centroid(self, humanoid_parts):
        sk = build_skeleton(humanoid_parts.chains, humanoid_parts.aligned)
        centroid = humanoid_parts.aligned.vertices.mean(axis=0)
        trunk = np.flatnonzero(np.array(sk.joint_labels) == "torso")
        d = np.linalg.norm(sk.joints[trunk] - centroid, axis=1)
        assert sk.root == trunk[int(np.argmin(d))]

    def test_all_joints_interior(self, y_tube_parts):
        sk = build_skeleton(y_tube_parts.chains, y_tube_parts.aligned)
        caster = RayCaster(y_tube_parts.aligned)
        rng = np.random.default_rng(21)
        dirs = rng.normal(size=(24, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        for joint in sk.joints:
            interior, _ = caster.is_interior(joint, dirs)
            assert interior

    def test_far_limb_raises_disconnected(self, humanoid_parts):
        squeezed = replace(humanoid_parts.chains, median_spacing=1e-6)
        with pytest.raises(DisconnectedChainError):
            build_skeleton(squeezed, humanoid_parts.aligned)

    def test_deterministic(self, y_tube_parts):
        a = build_skeleton(y_tube_parts.chains, y_tube_parts.aligned)
        b = build_skeleton(y_tube_parts.chains, y_tube_parts.aligned)
        assert np.array_equal(a.joints, b.joints)
        assert np.array_equal(a.bones, b.bones)
        assert a.root == b.root

    def test_smooth_option_builds(self, y_tube_parts):
        sk = build_skeleton(y_tube_parts.chains, y_tube_parts.aligned, smooth=True)
        assert len(sk.bones) == sk.n_joints - 1
