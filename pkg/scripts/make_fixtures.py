"""Write the desk-scale fixture meshes as OBJ files.

Usage: python scripts/make_fixtures.py [-o OUTDIR]

Produces the closed test shapes used throughout the test suite: a straight
cylinder, a bent-knee leg (891 vertices), a five-part humanoid, a branching
Y tube, and a UV sphere.
"""

import argparse
from pathlib import Path

from rigforge import creation
from rigforge.mesh import save_mesh, validate_topology


FIXTURES = {
    "cylinder": lambda: creation.cylinder(length=2.0, radius=0.3, rings=16, segments=24),
    "knee": creation.knee_fixture,
    "humanoid": creation.humanoid_fixture,
    "y_tube": creation.y_tube_fixture,
    "sphere": lambda: creation.uv_sphere(radius=1.0, rings=12, segments=24),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("-o", "--outdir", type=Path, default=Path("fixtures"))
    args = parser.parse_args()

    args.outdir.mkdir(parents=True, exist_ok=True)
    for name, build in FIXTURES.items():
        mesh = build()
        report = validate_topology(mesh)
        path = args.outdir / f"{name}.obj"
        save_mesh(mesh, path)
        print(
            f"{path}: {mesh.n_vertices} vertices, {mesh.n_faces} faces, "
            f"closed={report.is_closed}, components={report.connected_component_count}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
