import math

import numpy as np
import pytest

from rwg.geometry import Tag, WaveguideGeometry, build_rectangle, build_resonator
from rwg.mesh import MeshError, mesh_to_string, read_mesh, triangulate, write_mesh


@pytest.fixture(scope="module")
def square():
    return triangulate(build_rectangle(1.0, 1.0), 0.1, 0.0)


def test_unit_square_contract(square):
    assert np.all(square.areas() > 0)
    assert square.angles().min() >= 20.0
    assert square.areas().sum() == pytest.approx(1.0, rel=1e-12)
    square.check()


def test_refinement_triples_triangle_count(square):
    fine = triangulate(build_rectangle(1.0, 1.0), 0.05, 0.0)
    assert len(fine.triangles) >= 3 * len(square.triangles)


def test_grading_near_marked_corner():
    g = WaveguideGeometry()
    b = build_resonator(g)
    m = triangulate(b, 0.1, 0.5, r_ref=g.l)
    lengths = m.edge_lengths()
    cent = m.nodes[m.triangles].mean(axis=1)
    near = np.hypot(cent[:, 0], cent[:, 1]) < 0.02
    assert near.any()
    assert lengths[near].max() < 0.1 / 5


def test_every_boundary_edge_tagged():
    m = triangulate(build_rectangle(2.0, 1.0, [Tag.DIRICHLET, Tag.GAMMA_2, Tag.DIRICHLET, Tag.GAMMA_1]), 0.2, 0.0)
    assert set(np.unique(m.edge_tags)) == {int(Tag.DIRICHLET), int(Tag.GAMMA_1), int(Tag.GAMMA_2)}
    right = m.edges_with(Tag.GAMMA_2)
    assert np.allclose(m.nodes[right.ravel(), 0], 2.0)


def test_bad_h_max():
    with pytest.raises(MeshError):
        triangulate(build_rectangle(1.0, 1.0), 0.0)


def test_round_trip(tmp_path, square):
    p = tmp_path / "sq.mesh"
    write_mesh(square, p)
    m2 = read_mesh(p)
    assert np.array_equal(m2.nodes, square.nodes)
    assert np.array_equal(m2.triangles, square.triangles)
    assert np.array_equal(m2.edge_tags, square.edge_tags)
    assert mesh_to_string(m2) == mesh_to_string(square)


def test_deterministic():
    a = triangulate(build_rectangle(1.0, 1.0), 0.07, 0.0)
    b = triangulate(build_rectangle(1.0, 1.0), 0.07, 0.0)
    assert mesh_to_string(a) == mesh_to_string(b)
