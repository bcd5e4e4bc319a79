"""Joint/bone tree construction from labeled part chains.

The torso chain becomes the trunk; each limb chain is oriented head-first
(head = the end nearest the trunk) and attached by a bone to the nearest
trunk joint. Chains are decimated to bend points: an interior center
survives only when the polyline turns by more than the angle tolerance
there, so straight runs collapse to their endpoints. The trunk keeps one
extra anchor center per limb so attachments stay local even when the trunk
itself is straight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh
from .slicer import PartChains, RayCaster

__all__ = [
    "SkeletonError",
    "DisconnectedChainError",
    "Skeleton",
    "decimate_chain",
    "smooth_centers",
    "build_skeleton",
    "skeleton_path_distance",
]


class SkeletonError(ValueError):
    pass


class DisconnectedChainError(SkeletonError):
    """A limb chain's head is too far from every trunk joint to attach."""


@dataclass(frozen=True)
class Skeleton:
    joints: np.ndarray  # (j, 3)
    bones: np.ndarray  # (b, 2) joint-index pairs
    root: int
    bone_lengths: np.ndarray = field(default=None)
    joint_labels: tuple = None  # chain label per joint (metadata, optional)

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=float).reshape(-1, 3)
        bones = np.asarray(self.bones, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "bones", bones)
        n = len(joints)
        if n == 0:
            raise SkeletonError("skeleton needs at least one joint")
        if len(bones) != n - 1:
            raise SkeletonError(f"{len(bones)} bones cannot form a tree over {n} joints")
        if len(bones) and (bones.min() < 0 or bones.max() >= n):
            raise SkeletonError("bone endpoint out of range")
        if not 0 <= self.root < n:
            raise SkeletonError("root index out of range")
        lengths = np.linalg.norm(joints[bones[:, 1]] - joints[bones[:, 0]], axis=1) if len(bones) else np.zeros(0)
        if self.bone_lengths is None:
            object.__setattr__(self, "bone_lengths", lengths)
        else:
            supplied = np.asarray(self.bone_lengths, dtype=float)
            if supplied.shape != lengths.shape or np.abs(supplied - lengths).max(initial=0.0) > 1e-9:
                raise SkeletonError("bone_lengths disagree with joint geometry")
            object.__setattr__(self, "bone_lengths", supplied)
        # connectivity (|bones| = n-1 rules out cycles when connected)
        adj = [[] for _ in range(n)]
        for bi, (a, b) in enumerate(bones):
            adj[a].append((int(b), bi))
            adj[b].append((int(a), bi))
        seen = np.zeros(n, dtype=bool)
        stack = [self.root]
        seen[self.root] = True
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        if not seen.all():
            raise SkeletonError("bones do not connect all joints")
        object.__setattr__(self, "_adjacency", adj)
        # all-pairs tree path lengths by BFS from every joint (j is small)
        paths = np.zeros((n, n))
        for s in range(n):
            dist = np.full(n, -1.0)
            dist[s] = 0.0
            stack = [s]
            while stack:
                u = stack.pop()
                for v, bi in adj[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + self.bone_lengths[bi]
                        stack.append(v)
            paths[s] = dist
        object.__setattr__(self, "_path_lengths", paths)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def path_length_matrix(self) -> np.ndarray:
        """(j, j) matrix of tree path lengths between all joint pairs."""
        return self._path_lengths

    def neighbors(self, j: int) -> list:
        return [v for v, _ in self._adjacency[j]]

    def degree(self, j: int) -> int:
        return len(self._adjacency[j])

    def with_joints(self, joints: np.ndarray) -> "Skeleton":
        """Same tree over moved joints (lengths recomputed)."""
        return Skeleton(joints=np.asarray(joints, dtype=float), bones=self.bones,
                        root=self.root, joint_labels=self.joint_labels)

    def to_dict(self) -> dict:
        d = {
            "joints": self.joints.tolist(),
            "bones": self.bones.tolist(),
            "root": int(self.root),
            "bone_lengths": self.bone_lengths.tolist(),
        }
        if self.joint_labels is not None:
            d["joint_labels"] = list(self.joint_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        labels = d.get("joint_labels")
        return cls(
            joints=np.array(d["joints"], dtype=float),
            bones=np.array(d["bones"], dtype=np.int64).reshape(-1, 2),
            root=int(d["root"]),
            bone_lengths=np.array(d["bone_lengths"], dtype=float),
            joint_labels=tuple(labels) if labels is not None else None,
        )


def skeleton_path_distance(skeleton: Skeleton, a: int, b: int) -> float:
    """Length of the unique tree path between two joints."""
    n = skeleton.n_joints
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"joint index out of range: {a}, {b}")
    return float(skeleton._path_lengths[a, b])


def _keep_indices(centers: np.ndarray, angle_tolerance: float) -> list:
    n = len(centers)
    keep = [0]
    tol = np.radians(angle_tolerance)
    for i in range(1, n - 1):
        incoming = centers[i] - centers[i - 1]
        outgoing = centers[i + 1] - centers[i]
        ni, no = np.linalg.norm(incoming), np.linalg.norm(outgoing)
        if ni < 1e-12 or no < 1e-12:
            continue
        cosang = np.clip(incoming @ outgoing / (ni * no), -1.0, 1.0)
        if np.arccos(cosang) > tol:
            keep.append(i)
    if n > 1:
        keep.append(n - 1)
    return keep


def decimate_chain(centers, angle_tolerance: float = 10.0) -> np.ndarray:
    """Keep endpoints plus interior centers where the polyline bends by more
    than ``angle_tolerance`` degrees; straight chains collapse to 2 points."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    if len(centers) < 2:
        raise ValueError("decimate_chain needs >= 2 centers")
    return centers[_keep_indices(centers, angle_tolerance)]


def smooth_centers(centers) -> np.ndarray:
    """De-noise a center chain: a C1 cubic through the points (Catmull-Rom
    tangents), resampled along its arc at the input's own chord-length
    fractions (so straight chains come back unchanged whatever their
    spacing).

    Endpoints are reproduced exactly; chains shorter than 4 pass through
    unchanged.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    n = len(centers)
    if n < 4:
        return centers.copy()
    tangents = np.empty_like(centers)
    tangents[0] = centers[1] - centers[0]
    tangents[-1] = centers[-1] - centers[-2]
    tangents[1:-1] = 0.5 * (centers[2:] - centers[:-2])

    dense_per_seg = 64
    s = np.linspace(0.0, 1.0, dense_per_seg, endpoint=False)
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    pieces = []
    for i in range(n - 1):
        seg = (
            np.outer(h00, centers[i])
            + np.outer(h10, tangents[i])
            + np.outer(h01, centers[i + 1])
            + np.outer(h11, tangents[i + 1])
        )
        pieces.append(seg)
    dense = np.vstack(pieces + [centers[-1][None, :]])

    chord = np.linalg.norm(np.diff(centers, axis=0), axis=1)
    chord_cum = np.concatenate([[0.0], np.cumsum(chord)])
    fractions = chord_cum / chord_cum[-1] if chord_cum[-1] > 0 else np.linspace(0, 1, n)

    seglen = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    out = np.empty_like(centers)
    out[0] = centers[0]
    out[-1] = centers[-1]
    for k in range(1, n - 1):
        target = total * fractions[k]
        i = int(np.searchsorted(cum, target, side="right")) - 1
        i = min(max(i, 0), len(seglen) - 1)
        t = (target - cum[i]) / seglen[i] if seglen[i] > 0 else 0.0
        out[k] = dense[i] + t * (dense[i + 1] - dense[i])
    return out


def _limb_oriented(torso_centers: np.ndarray, limb_centers: np.ndarray):
    """Orient a limb head-first; head = the end nearest any torso center."""
    d_head = np.linalg.norm(torso_centers - limb_centers[0], axis=1).min()
    d_tail = np.linalg.norm(torso_centers - limb_centers[-1], axis=1).min()
    if d_tail < d_head:
        return limb_centers[::-1].copy(), float(d_tail)
    return limb_centers, float(d_head)


_PARITY_DIRS = None


def _parity_dirs(count: int = 32) -> np.ndarray:
    """Well-spread unit directions (Fibonacci sphere) for 3D interior votes."""
    global _PARITY_DIRS
    if _PARITY_DIRS is None:
        k = np.arange(count) + 0.5
        phi = np.arccos(1.0 - 2.0 * k / count)
        theta = np.pi * (1.0 + 5.0**0.5) * k
        _PARITY_DIRS = np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1
        )
    return _PARITY_DIRS


def build_skeleton(
    chains: PartChains,
    mesh: Mesh,
    *,
    angle_tolerance: float = 10.0,
    smooth: bool = False,
) -> Skeleton:
    """Assemble the joint tree from classified chains.

    Torso centers become trunk joints after decimation (anchors nearest each
    limb head are always kept); each limb attaches by a bone to the trunk
    joint nearest its head. The root is the trunk joint nearest the vertex
    centroid. Raises DisconnectedChainError when a limb head is farther than
    3x the median center spacing from every trunk joint, and SkeletonError
    when a joint fails the interior parity test against ``mesh``.
    """
    torso = chains.torso
    torso_centers = torso.centers
    if smooth:
        torso_centers = smooth_centers(torso_centers)

    limbs = []
    threshold = 3.0 * chains.median_spacing
    for limb in chains.limbs:
        centers = smooth_centers(limb.centers) if smooth else limb.centers
        oriented, head_dist = _limb_oriented(torso_centers, centers)
        if head_dist > threshold:
            raise DisconnectedChainError(
                f"{limb.label} head is {head_dist:.4f} from the trunk "
                f"(limit {threshold:.4f})"
            )
        limbs.append((limb.label, oriented))

    if len(torso_centers) >= 2:
        keep = set(_keep_indices(torso_centers, angle_tolerance))
    else:
        keep = {0}
    for _, oriented in limbs:
        keep.add(int(np.argmin(np.linalg.norm(torso_centers - oriented[0], axis=1))))
    trunk_idx = sorted(keep)
    trunk_joints = torso_centers[trunk_idx]

    joints = [trunk_joints]
    labels = ["torso"] * len(trunk_joints)
    bones = [[i, i + 1] for i in range(len(trunk_joints) - 1)]
    offset = len(trunk_joints)
    for label, oriented in limbs:
        limb_joints = decimate_chain(oriented, angle_tolerance) if len(oriented) >= 2 else oriented
        anchor = int(np.argmin(np.linalg.norm(trunk_joints - limb_joints[0], axis=1)))
        bones.append([anchor, offset])
        bones.extend([offset + i, offset + i + 1] for i in range(len(limb_joints) - 1))
        joints.append(limb_joints)
        labels.extend([label] * len(limb_joints))
        offset += len(limb_joints)

    all_joints = np.vstack(joints)
    centroid = mesh.vertices.mean(axis=0)
    root = int(np.argmin(np.linalg.norm(trunk_joints - centroid, axis=1)))
    skeleton = Skeleton(
        joints=all_joints,
        bones=np.array(bones, dtype=np.int64).reshape(-1, 2),
        root=root,
        joint_labels=tuple(labels),
    )

    caster = RayCaster(mesh)
    dirs = _parity_dirs()
    for j, joint in enumerate(skeleton.joints):
        interior, frac = caster.is_interior(joint, dirs)
        if not interior:
            raise SkeletonError(
                f"joint {j} at {np.round(joint, 4).tolist()} fails the interior "
                f"parity test (odd on {frac:.0%} of rays)"
            )
    return skeleton
