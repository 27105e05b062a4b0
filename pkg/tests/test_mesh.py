import numpy as np
import pytest

from vemsupg.mesh import (Mesh, MeshError, MeshParseError, generate, read_mesh, remap_m2,
                          validate, write_mesh)
from tests.conftest import cached_mesh, unit_square

FAMILIES = ["m1", "m2", "m3", "m4"]


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [5, 10])
def test_tiling_and_topology(family, n):
    mesh = cached_mesh(family, n)
    assert mesh.total_area() == pytest.approx(1.0, abs=1e-10)
    # every cell edge appears once in the table; interior edges have two cells
    counts = np.zeros(mesh.n_edges, dtype=int)
    for c in mesh.cells:
        np.add.at(counts, list(c.edge_ids), 1)
    assert np.all(counts == np.where(mesh.is_boundary, 1, 2))
    assert np.all((mesh.edge_cells[:, 1] >= 0) == ~mesh.is_boundary)
    np.testing.assert_allclose(np.hypot(*mesh.edge_normals.T), 1.0, atol=1e-14)
    for ci, c in enumerate(mesh.cells):
        xy = mesh.cell_xy(ci)
        shoelace = 0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
        assert c.area > 0
        assert c.area == pytest.approx(shoelace, rel=1e-12)
        d = np.sqrt(((xy[:, None] - xy[None]) ** 2).sum(-1)).max()
        assert c.diameter == d


@pytest.mark.parametrize("family", FAMILIES)
def test_boundary_is_unit_square(family):
    mesh = cached_mesh(family, 5)
    mids = mesh.edge_midpoints[mesh.is_boundary]
    on = np.isclose(mids, 0.0, atol=1e-14) | np.isclose(mids, 1.0, atol=1e-14)
    assert np.all(on.any(axis=1))
    assert mesh.edge_lengths[mesh.is_boundary].sum() == pytest.approx(4.0)


def test_normals_point_out_of_first_cell():
    mesh = cached_mesh("m2", 5)
    for e in range(mesh.n_edges):
        c0 = mesh.edge_cells[e, 0]
        out = mesh.edge_midpoints[e] - mesh.cells[c0].centroid
        assert out @ mesh.edge_normals[e] > 0


def test_m2_remap_fixed_point():
    x, y = remap_m2(np.array(0.5), np.array(0.5))
    assert (float(x), float(y)) == (0.5, 0.5)


@pytest.mark.parametrize("n", [5, 10])
def test_m1_interior_cells_are_hexagons(n):
    mesh = cached_mesh("m1", n)
    for c in mesh.cells:
        if not mesh.is_boundary[list(c.edge_ids)].any():
            assert c.n_edges == 6


def test_m4_counts():
    mesh = cached_mesh("m4", 5)
    assert mesh.n_cells == 25
    assert all(c.n_edges == 8 for c in mesh.cells)
    assert sum(c.area for c in mesh.cells) == pytest.approx(1.0, abs=1e-10)
    # non-convex: some interior angle is reflex
    xy = mesh.cell_xy(12)
    d1 = np.roll(xy, -1, 0) - xy
    d0 = xy - np.roll(xy, 1, 0)
    assert np.any(d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0] < 0)


def test_m3_deterministic():
    a, b = generate("m3", 5), generate("m3", 5)
    np.testing.assert_array_equal(a.vertices, b.vertices)


@pytest.mark.parametrize("family, n", [(f, n) for f in FAMILIES for n in (5, 10, 20)
                                       if not (f == "m2" and n == 5)])
def test_halving_reduces_hmax(family, n):
    ratio = cached_mesh(family, n).h_max / cached_mesh(family, 2 * n).h_max
    assert 1.8 <= ratio <= 2.2


@pytest.mark.xfail(strict=True, reason="the prescribed remap distorts the 5x5 grid more than "
                                       "the 10x10 one; the first halving gives ratio about 1.7")
def test_halving_m2_first_step():
    ratio = cached_mesh("m2", 5).h_max / cached_mesh("m2", 10).h_max
    assert 1.8 <= ratio <= 2.2


@pytest.mark.parametrize("n", [1, 0, -3])
def test_generate_rejects_small_n(n):
    with pytest.raises(ValueError):
        generate("m1", n)


def test_generate_rejects_unknown_family():
    with pytest.raises(ValueError):
        generate("m9", 5)


def test_validate_unit_square():
    rep = validate(unit_square(), 0.1)
    assert rep.min_edge_ratio == pytest.approx(1 / np.sqrt(2))
    assert rep.star_shaped_ok.all()
    assert rep.max_vertices_per_cell == 4


@pytest.mark.parametrize("family", FAMILIES)
def test_validate_families(family):
    rep = validate(cached_mesh(family, 5), 0.1)
    assert rep.min_edge_ratio > 0
    assert rep.star_shaped_ok.all()


def test_validate_zero_length_edge():
    mesh = Mesh([[0, 0], [1, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3, 4]], check=False)
    rep = validate(mesh, 0.1)
    assert rep.min_edge_ratio == 0.0
    assert not rep.ok


def test_validate_does_not_mutate():
    mesh = cached_mesh("m4", 5)
    before = mesh.vertices.copy()
    validate(mesh)
    np.testing.assert_array_equal(before, mesh.vertices)


def test_rejects_clockwise_and_self_intersecting():
    with pytest.raises(MeshError, match="cell 0"):
        Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 3, 2, 1]])
    with pytest.raises(MeshError, match="simple"):
        Mesh([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, -1]], [[0, 4, 1, 2, 3]])


@pytest.mark.parametrize("family", FAMILIES)
def test_file_round_trip(tmp_path, family):
    mesh = cached_mesh(family, 5)
    path = tmp_path / "m.txt"
    write_mesh(mesh, path)
    back = read_mesh(path)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    assert [c.vertex_ids for c in back.cells] == [c.vertex_ids for c in mesh.cells]
    np.testing.assert_array_equal(back.edge_vertices, mesh.edge_vertices)
    np.testing.assert_array_equal(back.edge_cells, mesh.edge_cells)


def test_file_format_layout(tmp_path):
    path = tmp_path / "sq.txt"
    write_mesh(unit_square(), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "vem-mesh 1"
    assert lines[1] == "vertices 4"
    assert lines[6] == "cells 1"
    assert lines[7] == "0 1 2 3"
    assert lines[8] == "boundary 4"
    assert len(lines) == 13


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ("vem-mesh 2\n", "line 1"),
    ("vem-mesh 1\nvertices 2\n0 0\n", "line 4"),
    ("vem-mesh 1\nvertices 1\n0 zero\n", "line 3"),
    ("vem-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n0 1 2\nboundary 3\n0 1\n1 2\n2 0\nextra\n",
     "line 12"),
])
def test_parse_errors(tmp_path, text, match):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(MeshParseError, match=match):
        read_mesh(path)


def test_missing_vertex_names_cell(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("vem-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 2\n0 1 2\n0 1 7\nboundary 0\n")
    with pytest.raises(MeshError, match="cell 1"):
        read_mesh(path)


def test_boundary_section_checked(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("vem-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n0 1 2\nboundary 1\n0 1\n")
    with pytest.raises(MeshError, match="boundary"):
        read_mesh(path)
