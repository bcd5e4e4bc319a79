"""Rig, pose, and report artifacts on disk.

All three are deterministic JSON (sorted keys, repr-exact floats), so rebuilds
from identical inputs are byte-identical and diffs stay readable. A rig file
embeds a 64-bit FNV-1a checksum of the source mesh's canonical byte stream;
bindings are index-based and silently wrong on any other mesh, so deformation
refuses a mesh whose checksum differs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .deform import ControlHandles
from .distortion import DistortionReport
from .frame import PrincipalFrame
from .mesh import Mesh
from .skeleton import Skeleton
from .skinning import SkinBinding

__all__ = [
    "FORMAT_VERSION",
    "Rig",
    "RigFileError",
    "ChecksumMismatchError",
    "mesh_checksum",
    "save_rig",
    "load_rig",
    "save_pose",
    "load_pose",
    "save_report",
    "load_report",
]

FORMAT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class RigFileError(ValueError):
    """Unreadable, truncated, or structurally invalid artifact file."""


class ChecksumMismatchError(RigFileError):
    """The rig was built from a different mesh than the one supplied."""


def mesh_checksum(mesh: Mesh) -> int:
    """64-bit FNV-1a over the mesh's canonical byte stream.

    The stream is a fixed header, the vertex and face counts as little-endian
    int64, every coordinate as little-endian float64 in row order, then every
    face index as little-endian int64 — so the value is independent of memory
    layout and platform.
    """
    stream = b"".join(
        [
            b"rigforge-mesh-v1",
            np.int64(mesh.n_vertices).astype("<i8").tobytes(),
            np.int64(mesh.n_faces).astype("<i8").tobytes(),
            np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes(),
            np.ascontiguousarray(mesh.faces, dtype="<i8").tobytes(),
        ]
    )
    value = _FNV_OFFSET
    for byte in stream:
        value = ((value ^ byte) * _FNV_PRIME) & _MASK64
    return value


@dataclass(frozen=True)
class Rig:
    """Everything the one-time setup stage produced, bound to its source mesh."""

    frame: PrincipalFrame
    skeleton: Skeleton
    binding: SkinBinding
    source_checksum: int
    format_version: int = FORMAT_VERSION

    @property
    def chain_count(self) -> int:
        labels = self.skeleton.joint_labels
        return len(set(labels)) if labels else 1

    def matches(self, mesh: Mesh) -> bool:
        return mesh_checksum(mesh) == self.source_checksum

    def require_match(self, mesh: Mesh) -> None:
        if not self.matches(mesh):
            raise ChecksumMismatchError(
                "mesh checksum does not match the rig's source mesh"
            )

    def to_dict(self) -> dict:
        return {
            "format_version": int(self.format_version),
            "source_checksum": f"{self.source_checksum:#018x}",
            "frame": self.frame.to_dict(),
            "skeleton": self.skeleton.to_dict(),
            "binding": self.binding.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Rig":
        version = int(d["format_version"])
        if version != FORMAT_VERSION:
            raise RigFileError(f"unsupported rig format version {version}")
        return cls(
            frame=PrincipalFrame.from_dict(d["frame"]),
            skeleton=Skeleton.from_dict(d["skeleton"]),
            binding=SkinBinding.from_dict(d["binding"]),
            source_checksum=int(d["source_checksum"], 16),
            format_version=version,
        )


def _dump(payload, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _loaded(path, what: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise RigFileError(f"cannot read {what} file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RigFileError(f"not a valid {what} file: {exc}") from exc


def save_rig(rig: Rig, path) -> None:
    _dump(rig.to_dict(), path)


def load_rig(path) -> Rig:
    data = _loaded(path, "rig")
    try:
        return Rig.from_dict(data)
    except RigFileError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise RigFileError(f"corrupt rig file: {exc}") from exc


def save_pose(handles: ControlHandles, path) -> None:
    """A pose file is a bare JSON list of [joint index, [x, y, z]] pairs."""
    _dump(handles.to_jsonable(), path)


def load_pose(path) -> ControlHandles:
    data = _loaded(path, "pose")
    try:
        return ControlHandles.from_jsonable(data)
    except (TypeError, ValueError) as exc:
        raise RigFileError(f"corrupt pose file: {exc}") from exc


def save_report(report: DistortionReport, path) -> None:
    _dump(report.to_jsonable(), path)


def load_report(path) -> DistortionReport:
    data = _loaded(path, "report")
    try:
        return DistortionReport.from_jsonable(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise RigFileError(f"corrupt report file: {exc}") from exc
