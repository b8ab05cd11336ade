"""Conforming polygonal meshes, mesh families and barycentric refinement."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .geometry import DegenerateGeometryError, batch_measures

INTERIOR, DIRICHLET, NEUMANN = 0, 1, 2
TAG_NAMES = {INTERIOR: "interior", DIRICHLET: "dirichlet", NEUMANN: "neumann"}

DOMAIN_AREAS = {"square": 4.0, "unit_square": 1.0, "lshape": 3.0, "disk": np.pi}


class MeshError(ValueError):
    """Invalid mesh input or unsupported generator request."""


class PolyMesh:
    """Immutable conforming polygonal mesh.

    Parameters
    ----------
    vertices : array (nv, 2)
    cells : sequence of integer sequences
        Counterclockwise vertex indices of each cell.
    boundary_tags : dict, optional
        ``{(i, j): tag}`` for boundary edges keyed by sorted vertex pair.
        Boundary edges not listed are Dirichlet.
    domain : str, optional
        Name of the domain the mesh covers (used to validate boundary setups).

    Notes
    -----
    Edge ``e`` joins ``edges[e, 0] < edges[e, 1]``. ``edge_cells[e, 0]`` is
    the lower-index adjacent cell and ``edge_cells[e, 1]`` the other one (or
    -1 on the boundary). The global normal of each edge points out of
    ``edge_cells[e, 0]``.
    """

    def __init__(self, vertices, cells, boundary_tags=None, domain=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.vertices.setflags(write=False)
        self.cells = [np.asarray(c, dtype=np.int64) for c in cells]
        self.domain = domain
        if not self.cells:
            raise MeshError("mesh has no cells")
        self._build_edges(boundary_tags or {})

    # -- construction -----------------------------------------------------

    def _build_edges(self, boundary_tags):
        sizes = np.array([len(c) for c in self.cells])
        if np.any(sizes < 3):
            raise MeshError("every cell needs at least 3 vertices")
        ptr = np.concatenate([[0], np.cumsum(sizes)])
        flat = np.concatenate(self.cells)
        if flat.min() < 0 or flat.max() >= len(self.vertices):
            raise MeshError("cell vertex index out of range")
        nxt = np.concatenate([np.roll(c, -1) for c in self.cells])
        owner = np.repeat(np.arange(len(self.cells)), sizes)
        lo, hi = np.minimum(flat, nxt), np.maximum(flat, nxt)
        if np.any(lo == hi):
            raise MeshError("cell with repeated consecutive vertex")
        key = lo * len(self.vertices) + hi
        uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two cells (non-conforming mesh)")
        ne = len(uniq)
        edges = np.stack([uniq // len(self.vertices), uniq % len(self.vertices)], axis=1)

        edge_cells = np.full((ne, 2), -1, dtype=np.int64)
        # local half-edges in (cell, position) order; first visit fills slot 0
        order = np.argsort(inv, kind="stable")
        first = np.ones(len(inv), dtype=bool)
        first[1:] = inv[order][1:] != inv[order][:-1]
        edge_cells[inv[order][first], 0] = owner[order][first]
        edge_cells[inv[order][~first], 1] = owner[order][~first]
        # orientation check: a shared edge must be traversed in opposite directions
        direction = flat < nxt
        d0 = np.zeros(ne, dtype=bool)
        d0[inv[order][first]] = direction[order][first]
        second = inv[order][~first]
        if np.any(d0[second] == direction[order][~first]):
            raise MeshError("adjacent cells traverse a shared edge in the same direction")

        self.edges = edges
        self.edge_cells = edge_cells
        self.cell_ptr = ptr
        self.cell_edges_flat = inv.astype(np.int64)
        # +1 when the cell is the lower-index neighbour, i.e. owns the global normal
        self.cell_edge_signs_flat = np.where(edge_cells[inv, 0] == owner, 1.0, -1.0)

        p, q = self.vertices[edges[:, 0]], self.vertices[edges[:, 1]]
        self.edge_lengths = np.linalg.norm(q - p, axis=1)
        self.edge_midpoints = 0.5 * (p + q)
        # outward normal of edge_cells[:, 0]: right-hand normal of its traversal
        first_dir = np.zeros(ne, dtype=bool)
        first_dir[inv[order][first]] = direction[order][first]
        tvec = (q - p) / self.edge_lengths[:, None]
        tvec[~first_dir] *= -1.0
        self.edge_normals = np.stack([tvec[:, 1], -tvec[:, 0]], axis=1)

        tags = np.where(edge_cells[:, 1] < 0, DIRICHLET, INTERIOR).astype(np.int8)
        for (i, j), tag in boundary_tags.items():
            key_ij = min(i, j) * len(self.vertices) + max(i, j)
            pos = np.searchsorted(uniq, key_ij)
            if pos < ne and uniq[pos] == key_ij and edge_cells[pos, 1] < 0:
                tags[pos] = tag
        self.boundary_tags = tags
        for arr in (self.edges, self.edge_cells, self.edge_lengths, self.edge_normals,
                    self.boundary_tags):
            arr.setflags(write=False)

    # -- basic queries ----------------------------------------------------

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    def cell_edges(self, k):
        return self.cell_edges_flat[self.cell_ptr[k]:self.cell_ptr[k + 1]]

    def cell_signs(self, k):
        return self.cell_edge_signs_flat[self.cell_ptr[k]:self.cell_ptr[k + 1]]

    def cell_vertices(self, k):
        return self.vertices[self.cells[k]]

    @cached_property
    def groups(self):
        """Cells grouped by vertex count: {n: cell index array}."""
        sizes = np.diff(self.cell_ptr)
        return {int(n): np.flatnonzero(sizes == n) for n in np.unique(sizes)}

    @cached_property
    def cell_measures(self):
        area = np.empty(self.n_cells)
        centroid = np.empty((self.n_cells, 2))
        diam = np.empty(self.n_cells)
        for n, idx in self.groups.items():
            X = self.vertices[np.stack([self.cells[k] for k in idx])]
            area[idx], centroid[idx], diam[idx] = batch_measures(X)
        return area, centroid, diam

    @property
    def areas(self):
        return self.cell_measures[0]

    @property
    def centroids(self):
        return self.cell_measures[1]

    @property
    def diameters(self):
        return self.cell_measures[2]

    @property
    def h(self):
        return float(self.diameters.max())

    def boundary_edges(self):
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    def with_boundary_tags(self, tag_of_midpoint):
        """Copy with boundary tags from a function of boundary-edge midpoints."""
        be = self.boundary_edges()
        tags = np.asarray(tag_of_midpoint(self.edge_midpoints[be]))
        mapping = {tuple(self.edges[e]): int(t) for e, t in zip(be, tags)}
        return PolyMesh(self.vertices, self.cells, mapping, self.domain)

    def tag_dict(self):
        be = self.boundary_edges()
        return {tuple(int(v) for v in self.edges[e]): int(self.boundary_tags[e]) for e in be}

    def check(self, area_tol=1e-10):
        """Validate invariants; returns self or raises :class:`MeshError`."""
        n_shared = np.bincount(np.r_[self.edge_cells[:, 0], self.edge_cells[self.edge_cells[:, 1] >= 0, 1]],
                               minlength=self.n_cells)
        sizes = np.diff(self.cell_ptr)
        if np.any(n_shared != sizes):
            raise MeshError("cell/edge incidence mismatch")
        self.cell_measures  # raises on degenerate cells
        if self.domain in DOMAIN_AREAS and self.domain != "disk":
            total = self.areas.sum()
            if abs(total - DOMAIN_AREAS[self.domain]) > area_tol * DOMAIN_AREAS[self.domain]:
                raise MeshError(f"cells cover area {total}, expected {DOMAIN_AREAS[self.domain]}")
        return self

    def __repr__(self):
        return (f"PolyMesh(domain={self.domain!r}, cells={self.n_cells}, "
                f"vertices={self.n_vertices}, edges={self.n_edges})")


# ---------------------------------------------------------------------------
# generators

_BOXES = {"square": (-1.0, 1.0), "unit_square": (0.0, 1.0), "lshape": (-1.0, 1.0)}


def _grid(n, lo, hi):
    xs = np.linspace(lo, hi, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[row j, col i]
    quads = np.stack([idx[:-1, :-1], idx[:-1, 1:], idx[1:, 1:], idx[1:, :-1]], axis=-1).reshape(-1, 4)
    return verts, quads


def _compact(verts, cells):
    used = np.unique(np.concatenate(cells))
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return verts[used], [remap[c] for c in cells]


def _squares(domain, N):
    lo, hi = _BOXES[domain]
    if domain == "lshape":
        verts, quads = _grid(2 * N, lo, hi)
        c = verts[quads].mean(axis=1)
        keep = ~((c[:, 0] < 0.0) & (c[:, 1] < 0.0))
        verts, cells = _compact(verts, list(quads[keep]))
        return verts, cells
    verts, quads = _grid(N, lo, hi)
    return verts, list(quads)


# staircase cut of the unit square from (0,0) to (1,1); both halves are
# nonconvex hexagons that remain star-shaped
_STAIR = np.array([[0.62, 0.18], [0.42, 0.5], [0.62, 0.82]])


def _split_staircase(verts, cells):
    verts = [tuple(v) for v in verts]
    out = []
    nv = len(verts)
    extra = []
    for c in cells:
        p0, p1, p2, p3 = (np.asarray(verts[i]) for i in c)
        ex, ey = p1 - p0, p3 - p0
        pts = [p0 + s * ex + t * ey for s, t in _STAIR]
        ids = list(range(nv + len(extra), nv + len(extra) + 3))
        extra.extend(pts)
        out.append([c[0], c[1], c[2], ids[2], ids[1], ids[0]])
        out.append([c[0], ids[0], ids[1], ids[2], c[2], c[3]])
    return np.vstack([np.asarray(verts), np.asarray(extra)]), out


def _remap(verts):
    s = 0.1 * np.sin(np.pi * verts[:, 0]) * np.sin(np.pi * verts[:, 1])
    return verts + s[:, None]


def _clip_to_disk(poly, radius=1.0):
    """Clip a convex polygon by the disk, joining boundary crossings by chords."""
    out = []
    inside = np.einsum("ij,ij->i", poly, poly) <= radius**2
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if inside[i]:
            out.append(a)
        d = b - a
        A = d @ d
        Bq = 2 * a @ d
        Cq = a @ a - radius**2
        disc = Bq * Bq - 4 * A * Cq
        if disc <= 0:
            continue
        sq = np.sqrt(disc)
        for s in sorted(((-Bq - sq) / (2 * A), (-Bq + sq) / (2 * A))):
            if 0.0 < s < 1.0:
                out.append(a + s * d)
    return np.asarray(out)


def _voronoi_cells(seeds, domain):
    from scipy.spatial import Voronoi

    if domain == "disk":
        r = np.linalg.norm(seeds, axis=1)
        mirror = seeds * ((2.0 - r) / r)[:, None]
        ghosts = [mirror]
    else:
        lo, hi = _BOXES[domain]
        ghosts = []
        for axis in (0, 1):
            for wall in (lo, hi):
                g = seeds.copy()
                g[:, axis] = 2 * wall - g[:, axis]
                ghosts.append(g)
    pts = np.vstack([seeds] + ghosts)
    vor = Voronoi(pts)
    polys = []
    for k in range(len(seeds)):
        region = vor.regions[vor.point_region[k]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region; seeds outside the domain?")
        P = vor.vertices[region]
        c = P.mean(axis=0)
        ang = np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0])
        P = P[np.argsort(ang)]
        if domain == "disk":
            P = _clip_to_disk(P)
        elif domain == "lshape":
            P = _clip_lshape(P)
        else:
            lo, hi = _BOXES[domain]
            P = np.clip(P, lo, hi)
        polys.append(P)
    return polys


def _clip_lshape(P):
    import shapely
    from shapely.geometry import Polygon as SPoly

    L = SPoly([(-1, 0), (0, 0), (0, -1), (1, -1), (1, 1), (-1, 1)])
    Pc = np.clip(P, -1.0, 1.0)
    g = SPoly(Pc).intersection(L)
    if g.geom_type != "Polygon":
        raise MeshError("Voronoi cell split into several pieces by the re-entrant corner")
    g = shapely.geometry.polygon.orient(g, 1.0)
    return np.asarray(g.exterior.coords)[:-1]


def _seed_points(rng, n, domain):
    out = []
    while sum(len(o) for o in out) < n:
        if domain == "disk":
            p = rng.uniform(-1, 1, size=(2 * n, 2))
            p = p[np.einsum("ij,ij->i", p, p) < 0.98]
        else:
            lo, hi = _BOXES[domain]
            p = rng.uniform(lo, hi, size=(2 * n, 2))
            if domain == "lshape":
                p = p[~((p[:, 0] < 0) & (p[:, 1] < 0))]
        out.append(p)
    return np.vstack(out)[:n]


def _polygon_centroids(polys):
    cs = []
    for P in polys:
        x, y = P[:, 0], P[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        a = 0.5 * cr.sum()
        cs.append([((x + xn) * cr).sum() / (6 * a), ((y + yn) * cr).sum() / (6 * a)])
    return np.asarray(cs)


def _merge_polygons(polys, tol):
    """Shared vertex table from a polygon soup, merging points closer than ``tol``."""
    from scipy.spatial import cKDTree

    allp = np.vstack(polys)
    tree = cKDTree(allp)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(allp))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(allp))])
    uniq, label = np.unique(roots, return_inverse=True)
    verts = allp[uniq]
    cells = []
    start = 0
    for P in polys:
        ids = label[start:start + len(P)]
        start += len(P)
        keep = np.r_[ids[1:] != ids[:-1], ids[0] != ids[-1]] if len(ids) > 1 else np.array([True])
        ids = ids[keep]
        if len(ids) >= 3:
            cells.append(ids)
    return verts, cells


def _snap_boundary(verts, domain, tol):
    v = verts.copy()
    if domain == "disk":
        r = np.linalg.norm(v, axis=1)
        on = np.abs(r - 1.0) < tol
        v[on] /= r[on, None]
        return v
    lines = [-1.0, 0.0, 1.0] if domain == "lshape" else list(_BOXES[domain])
    for axis in (0, 1):
        for w in lines:
            near = np.abs(v[:, axis] - w) < tol
            v[near, axis] = w
    return v


def _voronoi(domain, N, seed, lloyd, stream):
    rng = np.random.default_rng([seed, stream])
    area = DOMAIN_AREAS[domain]
    box = 2.0 if domain != "unit_square" else 1.0
    # N cells per side of the bounding box, scaled by the covered fraction
    n_seeds = N * N if domain in ("square", "unit_square") else int(round(N * N * area / box**2))
    seeds = _seed_points(rng, n_seeds, domain)
    for _ in range(lloyd):
        polys = _voronoi_cells(seeds, domain)
        seeds = _polygon_centroids(polys)
    polys = _voronoi_cells(seeds, domain)
    h = box / N
    verts, cells = _merge_polygons(polys, 1e-9 * h)
    verts = _snap_boundary(verts, domain, 1e-10 * h)
    return verts, cells


FAMILIES = ("T1", "T2", "T3", "T4", "T5")
DOMAINS = ("square", "unit_square", "disk", "lshape")
LLOYD_ITERATIONS = {"T2": 30, "T3": 1}


def generate(domain="square", family="T1", N=8, seed=0):
    """Build a mesh of ``domain`` from one of the five families.

    ``N`` is the number of cells along a side of the domain's bounding box
    ((-1, 1)^2 for square, disk and lshape; (0, 1)^2 for unit_square), except
    for ``lshape`` where it counts cells per unit length (so 3 N^2 squares).
    """
    family = family.upper()
    if domain not in DOMAINS:
        raise MeshError(f"unknown domain {domain!r}; expected one of {DOMAINS}")
    if family not in FAMILIES:
        raise MeshError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if N < 2:
        raise MeshError("N must be at least 2")
    if domain == "disk" and family not in ("T2", "T3"):
        raise MeshError("the disk supports only the Voronoi families T2 and T3")

    if family in ("T2", "T3"):
        n_side = 2 * N if domain == "lshape" else N
        verts, cells = _voronoi(domain, n_side, seed, LLOYD_ITERATIONS[family],
                                stream=2 if family == "T2" else 3)
    else:
        verts, cells = _squares(domain, N)
        if family == "T4":
            verts, cells = _split_staircase(verts, cells)
        elif family == "T5":
            verts = _remap(verts)
    return PolyMesh(verts, cells, domain=domain).check()


# ---------------------------------------------------------------------------
# refinement


def refine(mesh, marked):
    """Split marked cells into quadrilaterals around their centroid.

    Every edge of a marked cell is bisected; an unmarked neighbour keeps its
    shape and simply gains the midpoint as an extra vertex. Boundary tags of
    bisected edges pass to both halves.
    """
    marked = np.unique(np.asarray(list(marked), dtype=np.int64))
    if marked.size and (marked[0] < 0 or marked[-1] >= mesh.n_cells):
        raise MeshError("marked cell index out of range")
    if marked.size == 0:
        return mesh
    is_marked = np.zeros(mesh.n_cells, dtype=bool)
    is_marked[marked] = True

    split = np.zeros(mesh.n_edges, dtype=bool)
    for k in marked:
        split[mesh.cell_edges(k)] = True
    split_ids = np.flatnonzero(split)
    nv = mesh.n_vertices
    mid_index = -np.ones(mesh.n_edges, dtype=np.int64)
    mid_index[split_ids] = nv + np.arange(len(split_ids))
    centroids = mesh.centroids[marked]
    c_index = nv + len(split_ids) + np.arange(len(marked))
    verts = np.vstack([mesh.vertices, mesh.edge_midpoints[split_ids], centroids])

    tags = {}
    old_tags = mesh.tag_dict()
    for e in split_ids:
        i, j = (int(v) for v in mesh.edges[e])
        if (i, j) in old_tags:
            m = int(mid_index[e])
            tags[(i, m)] = tags[(j, m)] = old_tags[(i, j)]
    for key, t in old_tags.items():
        tags.setdefault(key, t)

    cells = []
    c_of = dict(zip(marked.tolist(), c_index.tolist()))
    for k in range(mesh.n_cells):
        vs = mesh.cells[k]
        es = mesh.cell_edges(k)
        if not is_marked[k]:
            if not split[es].any():
                cells.append(vs)
                continue
            new = []
            for v, e in zip(vs, es):
                new.append(v)
                if split[e]:
                    new.append(mid_index[e])
            cells.append(np.asarray(new))
            continue
        c = c_of[k]
        mids = mid_index[es]
        n = len(vs)
        for i in range(n):
            cells.append(np.array([mids[i - 1], vs[i], mids[i], c]))
    out = PolyMesh(verts, cells, tags, mesh.domain)
    # sub-quadrilaterals of distorted cells may fold over
    try:
        out.cell_measures
    except DegenerateGeometryError as exc:
        raise MeshError(f"refinement produced a degenerate cell: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# quality


@dataclass
class MeshQualityReport:
    kernel_ratio: np.ndarray
    vertex_ratio: np.ndarray

    @property
    def min_kernel_ratio(self):
        return float(self.kernel_ratio.min())

    @property
    def min_vertex_ratio(self):
        return float(self.vertex_ratio.min())


def kernel_radius(P):
    """Radius of the largest disk inside the kernel of polygon P (0 if empty)."""
    e = np.roll(P, -1, axis=0) - P
    L = np.linalg.norm(e, axis=1)
    nrm = np.stack([e[:, 1], -e[:, 0]], axis=1) / L[:, None]
    # n . c + r <= n . p_i  for every edge line
    A = np.hstack([nrm, np.ones((len(P), 1))])
    b = np.einsum("ij,ij->i", nrm, P)
    res = linprog([0, 0, -1], A_ub=A, b_ub=b, bounds=[(None, None), (None, None), (0, None)],
                  method="highs")
    if res.status != 0:
        return 0.0
    return max(float(res.x[2]), 0.0)


def quality(mesh):
    """Per-cell kernel inscribed radius and minimum vertex spacing, both over h_K."""
    diam = mesh.diameters
    kr = np.empty(mesh.n_cells)
    vr = np.empty(mesh.n_cells)
    for k in range(mesh.n_cells):
        P = mesh.cell_vertices(k)
        kr[k] = kernel_radius(P) / diam[k]
        d = np.linalg.norm(P[:, None] - P[None], axis=-1)
        vr[k] = d[np.triu_indices(len(P), 1)].min() / diam[k]
    return MeshQualityReport(kr, vr)
