import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from vemstokes.polymesh import (
    DIRICHLET,
    DOMAIN_AREAS,
    FAMILIES,
    NEUMANN,
    MeshError,
    PolyMesh,
    generate,
    kernel_radius,
    quality,
    refine,
)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("domain", ["square", "unit_square", "lshape"])
def test_families_tile_the_domain(domain, family):
    mesh = generate(domain, family, 6, seed=3)
    assert mesh.areas.sum() == pytest.approx(DOMAIN_AREAS[domain], rel=1e-12)
    assert np.all(mesh.areas > 0)
    # every interior edge has two neighbours with opposite normals
    inner = mesh.edge_cells[:, 1] >= 0
    assert inner.sum() > 0


def test_t1_counts():
    mesh = generate("square", "T1", 4)
    assert (mesh.n_cells, mesh.n_vertices, mesh.n_edges) == (16, 25, 40)
    lmesh = generate("lshape", "T1", 21)
    assert lmesh.n_cells == 3 * 21**2


def test_t4_is_nonconvex():
    mesh = generate("square", "T4", 3)
    q = quality(mesh)
    hull = [shapely.Polygon(mesh.cell_vertices(k)).convex_hull.area for k in range(mesh.n_cells)]
    assert np.any(np.array(hull) > mesh.areas * (1 + 1e-6))
    assert q.min_kernel_ratio > 0


def test_t5_distortion_keeps_boundary():
    mesh = generate("square", "T5", 8)
    on_bnd = np.unique(mesh.edges[mesh.boundary_edges()].ravel())
    v = mesh.vertices[on_bnd]
    assert np.all(np.isclose(np.abs(v).max(axis=1), 1.0))


def test_disk_chord_polygon():
    mesh = generate("disk", "T2", 8, seed=1)
    r = np.linalg.norm(mesh.vertices[np.unique(mesh.edges[mesh.boundary_edges()])], axis=1)
    np.testing.assert_allclose(r, 1.0, atol=1e-12)
    assert mesh.areas.sum() < np.pi
    with pytest.raises(MeshError):
        generate("disk", "T1", 8)


def test_voronoi_is_seed_deterministic():
    a = generate("square", "T2", 6, seed=11)
    b = generate("square", "T2", 6, seed=11)
    c = generate("square", "T3", 6, seed=11)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    assert a.n_cells == 36 and c.n_cells == 36
    assert not np.array_equal(a.centroids, c.centroids)


def test_kernel_radius_square():
    P = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
    assert kernel_radius(P) == pytest.approx(1.0, rel=1e-9)


def test_bad_meshes_raise():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    with pytest.raises(MeshError):
        PolyMesh(v, [[0, 1, 2], [0, 1, 3]])  # shared edge traversed the same way
    with pytest.raises(MeshError):
        PolyMesh(v, [[0, 1]])
    with pytest.raises(MeshError):
        generate("triangle", "T1", 4)


def test_refine_hanging_node_and_tags():
    base = generate("unit_square", "T1", 2)
    tagged = base.with_boundary_tags(lambda m: np.where(m[:, 1] < 1e-12, DIRICHLET, NEUMANN))
    fine = refine(tagged, [0])
    assert fine.n_cells == 4 + 3
    # the two unmarked neighbours of cell 0 gain a hanging vertex
    sizes = sorted(len(c) for c in fine.cells)
    assert sizes.count(5) == 2
    tags = fine.boundary_tags[fine.boundary_edges()]
    mids = fine.edge_midpoints[fine.boundary_edges()]
    np.testing.assert_array_equal(tags == DIRICHLET, mids[:, 1] < 1e-12)


def test_refine_rejects_bad_index():
    with pytest.raises(MeshError):
        refine(generate("square", "T1", 2), [7])


def test_refine_one_interior_square():
    mesh = generate("square", "T1", 3)
    fine = refine(mesh, [4])
    assert fine.n_cells == 9 + 3
    assert sorted(len(c) for c in fine.cells).count(5) == 4


def test_refine_all_squares_matches_finer_grid():
    fine = refine(generate("square", "T1", 4), range(16))
    ref = generate("square", "T1", 8)
    key = lambda m: np.round(np.sort(m.centroids.view(complex).ravel()), 12)
    np.testing.assert_array_equal(key(fine), key(ref))
    np.testing.assert_allclose(np.sort(fine.areas), np.sort(ref.areas), rtol=1e-13)


def test_refine_triangle_gives_three_quads():
    v = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float)
    mesh = PolyMesh(v, [[0, 1, 2], [1, 3, 2]])
    fine = refine(mesh, [0])
    assert [len(c) for c in fine.cells].count(4) == 4  # 3 quads plus the neighbour
    assert fine.areas.sum() == pytest.approx(1.0, rel=1e-15)


def test_refine_rejects_folded_staircase_cells():
    # the barycentre of a staircase hexagon lies outside its kernel
    with pytest.raises(MeshError):
        refine(generate("square", "T4", 4), [0])


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["T1", "T2", "T3", "T5"]), st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_refine_conserves_area(family, seed, frac):
    mesh = generate("square", family, 4, seed=seed % 1000)
    rng = np.random.default_rng(seed)
    marked = rng.choice(mesh.n_cells, size=max(1, int(frac * mesh.n_cells)), replace=False)
    fine = refine(mesh, marked)
    assert abs(fine.areas.sum() - mesh.areas.sum()) <= 1e-12 * mesh.areas.sum()
    assert fine.n_cells == mesh.n_cells + sum(len(mesh.cells[k]) - 1 for k in marked)
    fine.check()
