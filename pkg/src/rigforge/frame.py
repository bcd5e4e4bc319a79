"""Body-aligned principal frame: PCA of the vertex cloud.

The frame's axes are unit eigenvectors of the vertex covariance, ordered by
descending eigenvalue, so axis 0 is the direction the cloud is most stretched
along (height for a standing character), then width, then thickness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import jacobi_eigh
from .mesh import Mesh

__all__ = [
    "PrincipalFrame",
    "DegenerateFrameError",
    "compute_frame",
    "to_frame",
    "from_frame",
    "points_from_frame",
]


class DegenerateFrameError(ValueError):
    """Principal directions are ambiguous or undefined for this vertex cloud."""


@dataclass(frozen=True)
class PrincipalFrame:
    """center: vertex centroid; axes: (3, 3) with unit axes as rows, det +1;
    extents: half-ranges of the cloud along each axis."""

    center: np.ndarray
    axes: np.ndarray
    extents: np.ndarray

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=float)
        gram = axes @ axes.T
        if not np.allclose(gram, np.eye(3), atol=1e-9):
            raise ValueError("frame axes must be orthonormal")
        if np.linalg.det(axes) < 0.0:
            raise ValueError("frame axes must be right-handed")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "extents", np.asarray(self.extents, dtype=float))

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "axes": self.axes.tolist(),
            "extents": self.extents.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrincipalFrame":
        return cls(np.array(d["center"]), np.array(d["axes"]), np.array(d["extents"]))


def compute_frame(mesh: Mesh, relative_tol: float = 1e-9) -> PrincipalFrame:
    """PCA frame of the vertex cloud (uniform vertex weights).

    Sign convention: each axis is flipped so its largest-magnitude coordinate
    is positive; right-handedness is then restored, if needed, by flipping the
    last axis. Raises DegenerateFrameError when the two largest eigenvalues
    coincide within ``relative_tol`` (direction ambiguous) or the cloud is
    coplanar / has fewer than 4 vertices.
    """
    v = mesh.vertices
    if len(v) < 4:
        raise DegenerateFrameError(f"need at least 4 vertices, got {len(v)}")
    center = v.mean(axis=0)
    centered = v - center
    cov = centered.T @ centered / len(v)
    evals, evecs = jacobi_eigh(cov, tol=1e-12)

    if evals[0] <= 0.0:
        raise DegenerateFrameError("vertex cloud has no spatial extent")
    if evals[2] <= 1e-12 * evals[0]:
        raise DegenerateFrameError("vertex cloud is coplanar")
    if (evals[0] - evals[1]) <= relative_tol * evals[0]:
        raise DegenerateFrameError(
            f"ambiguous principal direction: leading eigenvalues {evals[0]:.6g} ~= {evals[1]:.6g}"
        )

    axes = evecs.T  # rows
    for i in range(3):
        k = int(np.argmax(np.abs(axes[i])))
        if axes[i, k] < 0.0:
            axes[i] = -axes[i]
    if np.linalg.det(axes) < 0.0:
        axes[2] = -axes[2]

    proj = centered @ axes.T
    extents = 0.5 * (proj.max(axis=0) - proj.min(axis=0))
    return PrincipalFrame(center=center, axes=axes, extents=extents)


def to_frame(mesh: Mesh, frame: PrincipalFrame) -> Mesh:
    """Re-express the mesh in frame coordinates (axis 0 = major direction)."""
    return mesh.with_vertices((mesh.vertices - frame.center) @ frame.axes.T)


def from_frame(mesh: Mesh, frame: PrincipalFrame) -> Mesh:
    """Inverse of to_frame."""
    return mesh.with_vertices(mesh.vertices @ frame.axes + frame.center)


def points_from_frame(points: np.ndarray, frame: PrincipalFrame) -> np.ndarray:
    """Map frame-coordinate points back to original coordinates."""
    return np.asarray(points, dtype=float) @ frame.axes + frame.center
