"""Plain-text mesh files, CSV tables and legacy VTK output."""

import csv
import hashlib
import json

import numpy as np

from .polymesh import PolyMesh


def config_hash(spec):
    """Short stable hash of a JSON-serialisable experiment description."""
    blob = json.dumps(spec, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_csv(path, columns, rows):
    """Write dict rows with a header; floats get 10 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# mesh text format
#
#   vertices <nv>
#   x y                      (nv lines)
#   cells <nc>
#   k i_0 ... i_{k-1}        (nc lines, counterclockwise)
#   boundary <nb>
#   i j tag                  (nb lines)
#   domain <name>            (optional)


def write_mesh(path, mesh):
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for c in mesh.cells:
            fh.write(" ".join(map(str, [len(c), *c])) + "\n")
        tags = mesh.tag_dict()
        fh.write(f"boundary {len(tags)}\n")
        for (i, j), t in sorted(tags.items()):
            fh.write(f"{i} {j} {t}\n")
        if mesh.domain:
            fh.write(f"domain {mesh.domain}\n")


def read_mesh(path):
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    pos = 0

    def section(name):
        nonlocal pos
        if lines[pos][0] != name:
            raise ValueError(f"expected section {name!r}, found {lines[pos][0]!r}")
        n = int(lines[pos][1])
        body = lines[pos + 1:pos + 1 + n]
        pos += n + 1
        return body

    verts = np.array([[float(a), float(b)] for a, b in section("vertices")])
    cells = [[int(v) for v in ln[1:1 + int(ln[0])]] for ln in section("cells")]
    tags = {}
    if pos < len(lines) and lines[pos][0] == "boundary":
        tags = {tuple(sorted((int(i), int(j)))): int(t) for i, j, t in section("boundary")}
    domain = None
    if pos < len(lines) and lines[pos][0] == "domain":
        domain = lines[pos][1]
    return PolyMesh(verts, cells, tags, domain)


# ---------------------------------------------------------------------------
# legacy VTK


def write_vtk(path, mesh, point_vectors=None, cell_scalars=None, cell_vectors=None,
              title="vemstokes output"):
    """Legacy ASCII VTK 4.2 polydata with polygon cells.

    ``point_vectors`` maps names to (nv, 2) arrays, ``cell_scalars`` to
    (nc,) arrays and ``cell_vectors`` to (nc, 2) arrays.
    """
    nv, nc = mesh.n_vertices, mesh.n_cells
    size = sum(len(c) + 1 for c in mesh.cells)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 4.2\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.12g} {y:.12g} 0\n")
        fh.write(f"POLYGONS {nc} {size}\n")
        for c in mesh.cells:
            fh.write(" ".join(map(str, [len(c), *c])) + "\n")
        if cell_scalars or cell_vectors:
            fh.write(f"CELL_DATA {nc}\n")
            for name, vals in (cell_scalars or {}).items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("\n".join(f"{v:.12g}" for v in np.asarray(vals, float)) + "\n")
            for name, vals in (cell_vectors or {}).items():
                fh.write(f"VECTORS {name} double\n")
                fh.write("\n".join(f"{a:.12g} {b:.12g} 0" for a, b in np.asarray(vals, float)) + "\n")
        if point_vectors:
            fh.write(f"POINT_DATA {nv}\n")
            for name, vals in point_vectors.items():
                fh.write(f"VECTORS {name} double\n")
                fh.write("\n".join(f"{a:.12g} {b:.12g} 0" for a, b in np.asarray(vals, float)) + "\n")


def eigenfunction_fields(mesh, system, solution, index=0):
    """Vertex velocities, cell pressures and Pi0 velocity at cell centroids."""
    u = solution.u[:, index]
    nv = mesh.n_vertices
    vel = np.column_stack([u[0:2 * nv:2], u[1:2 * nv:2]])
    pi0 = np.zeros((mesh.n_cells, 2))
    for grp in system.groups:
        coef = np.einsum("bij,bj->bi", grp.Pi0, u[grp.dofs])
        pi0[grp.cells] = coef[:, :2]  # value at the centroid
    return vel, solution.p[:, index].copy(), pi0
