"""Command-line front end: build rigs, deform meshes, inspect artifacts, serve.

Exit codes are distinct and stable so scripts can branch on them:
  0 success
  1 unreadable or unparseable input file
  2 mesh is not closed
  3 degenerate principal frame (no usable major axis)
  4 rig/mesh checksum mismatch
  5 pose references an unknown joint
Every failure prints a single ``code: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_OPEN_MESH = 2
EXIT_DEGENERATE_FRAME = 3
EXIT_CHECKSUM = 4
EXIT_BAD_POSE = 5

_MODE_NAMES = {"nearest": "nearest", "all": "all", "parity": "parity-refined"}


def _fail(code: int, message: str) -> int:
    print(f"{code}: {message}", file=sys.stderr)
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rigforge",
        description="Skeleton extraction, skinning, and handle-driven deformation "
        "for closed triangle meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rig = sub.add_parser("rig", help="build a rig file from a mesh")
    rig.add_argument("mesh", type=Path)
    rig.add_argument("-o", "--output", type=Path, required=True)
    rig.add_argument("--slices", type=int, default=32, metavar="N")
    rig.add_argument("--rays", type=int, default=64, metavar="N")
    rig.add_argument("--mode", choices=sorted(_MODE_NAMES), default="parity")
    rig.add_argument(
        "--angle-tol", type=float, default=10.0, metavar="DEG",
        help="turn angle a skeleton joint must exceed to survive decimation",
    )
    rig.add_argument(
        "--alpha", type=float, default=2.0, metavar="A",
        help="skin weight falloff exponent",
    )

    dfm = sub.add_parser("deform", help="apply a pose file to a rigged mesh")
    dfm.add_argument("mesh", type=Path)
    dfm.add_argument("rig", type=Path)
    dfm.add_argument("pose", type=Path)
    dfm.add_argument("-o", "--output", type=Path, required=True)
    dfm.add_argument(
        "--threshold", type=float, default=60.0, metavar="DEG",
        help="joint rotation angle that triggers decomposition",
    )
    dfm.add_argument(
        "--step", type=float, default=30.0, metavar="DEG",
        help="maximum rotation angle applied per decomposition step",
    )
    dfm.add_argument(
        "--no-decompose", action="store_true",
        help="always deform in a single pass, even past the threshold",
    )

    ins = sub.add_parser("inspect", help="summarize a rig file")
    ins.add_argument("rig", type=Path)

    srv = sub.add_parser("serve", help="run the interactive session service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=7474)
    return parser


def _cmd_rig(args) -> int:
    from .frame import DegenerateFrameError
    from .mesh import MeshError, load_mesh
    from .pipeline import RigConfig, build_rig
    from .rigfile import save_rig
    from .slicer import OpenMeshError

    try:
        mesh = load_mesh(args.mesh)
    except (MeshError, OSError) as exc:
        return _fail(EXIT_PARSE, f"cannot read mesh: {exc}")
    config = RigConfig(
        slice_count=args.slices,
        ray_count=args.rays,
        mode=_MODE_NAMES[args.mode],
        angle_tolerance=args.angle_tol,
        weight_alpha=args.alpha,
    )
    try:
        rig = build_rig(mesh, config)
    except OpenMeshError as exc:
        return _fail(EXIT_OPEN_MESH, str(exc))
    except DegenerateFrameError as exc:
        return _fail(EXIT_DEGENERATE_FRAME, str(exc))
    save_rig(rig, args.output)
    sk = rig.skeleton
    print(
        f"wrote {args.output}: {sk.n_joints} joints, {len(sk.bones)} bones, "
        f"{rig.chain_count} chains"
    )
    return EXIT_OK


def _report_path(output: Path) -> Path:
    return output.with_name(output.stem + ".report.json")


def _cmd_deform(args) -> int:
    from .deform import deform
    from .distortion import DetectorConfig
    from .mesh import MeshError, load_mesh, save_mesh
    from .rigfile import ChecksumMismatchError, RigFileError, load_pose, load_rig, save_report

    try:
        mesh = load_mesh(args.mesh)
    except (MeshError, OSError) as exc:
        return _fail(EXIT_PARSE, f"cannot read mesh: {exc}")
    try:
        rig = load_rig(args.rig)
        handles = load_pose(args.pose)
    except RigFileError as exc:
        return _fail(EXIT_PARSE, str(exc))

    try:
        rig.require_match(mesh)
    except ChecksumMismatchError as exc:
        return _fail(EXIT_CHECKSUM, str(exc))
    if np.any(handles.joints < 0) or np.any(handles.joints >= rig.skeleton.n_joints):
        return _fail(
            EXIT_BAD_POSE,
            f"pose references a joint outside 0..{rig.skeleton.n_joints - 1}",
        )

    config = DetectorConfig(
        angle_threshold=math.radians(args.threshold),
        max_step_angle=math.radians(min(args.step, args.threshold)),
    )
    out_mesh, _pose, report = deform(
        mesh,
        rig.skeleton,
        rig.binding,
        handles,
        config=config,
        decompose=not args.no_decompose,
    )
    save_mesh(out_mesh, args.output)
    report_file = _report_path(args.output)
    save_report(report, report_file)
    flags = ",".join(str(j) for j in sorted(report.flagged_joints)) or "none"
    print(
        f"wrote {args.output} (report {report_file}): distortion "
        f"{report.global_distortion:.6g}, steps {report.steps_used}, flagged joints {flags}"
    )
    return EXIT_OK


def _cmd_inspect(args) -> int:
    from .rigfile import RigFileError, load_rig

    try:
        rig = load_rig(args.rig)
    except RigFileError as exc:
        return _fail(EXIT_PARSE, str(exc))
    sk = rig.skeleton
    weights = rig.binding.joint_weights
    influences = (weights > 0.0).sum(axis=1)
    sums = weights.sum(axis=1)
    print(f"format version: {rig.format_version}")
    print(f"source checksum: {rig.source_checksum:#018x}")
    print(f"joints: {sk.n_joints}")
    print(f"bones: {len(sk.bones)}")
    print(f"chains: {rig.chain_count}")
    lengths = " ".join(f"{v:.6g}" for v in sk.bone_lengths)
    print(f"bone lengths: {lengths}")
    print(f"vertices: {rig.binding.n_vertices}")
    print(
        "influences per vertex: "
        f"min={int(influences.min())} max={int(influences.max())} mean={influences.mean():.3f}"
    )
    print(f"weight sums: min={sums.min():.12f} max={sums.max():.12f}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    command = {
        "rig": _cmd_rig,
        "deform": _cmd_deform,
        "inspect": _cmd_inspect,
        "serve": _cmd_serve,
    }[args.command]
    return command(args)


if __name__ == "__main__":
    sys.exit(main())
