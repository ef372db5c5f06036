import numpy as np
import pytest

from varexp.mesh import MeshError, Rect, build_mesh, geometry_of, mesh_from_arrays, triangle_geometry


def test_counts_50x50(square):
    m = build_mesh(square, 50, 50)
    assert m.n_vertices == 2601
    assert m.n_triangles == 5000
    assert m.boundary_mask.sum() == 200


def test_areas_sum_and_positive(square):
    m = build_mesh(square, 7, 5)
    assert np.all(m.areas > 0)
    assert m.areas.sum() == pytest.approx(4.0, rel=1e-14)


def test_reference_triangle_geometry():
    area, grads = geometry_of([[0, 0], [1, 0], [0, 1]])
    assert area == pytest.approx(0.5)
    np.testing.assert_allclose(grads, [[-1, -1], [1, 0], [0, 1]], atol=1e-15)


def test_gradients_reproduce_linears(square):
    m = build_mesh(square, 4, 3)
    u = m.interpolate(lambda x, y: 2 * x - 3 * y + 1)
    g = np.einsum("tkd,tk->td", m.grads, u[m.triangles])
    np.testing.assert_allclose(g, np.tile([2.0, -3.0], (m.n_triangles, 1)), atol=1e-12)


def test_shape_function_gradients_sum_to_zero(square):
    m = build_mesh(square, 5, 5)
    np.testing.assert_allclose(m.grads.sum(axis=1), 0, atol=1e-12)


def test_boundary_flags(square):
    m = build_mesh(square, 3, 4)
    v = m.vertices[m.boundary_mask]
    on_edge = (np.isclose(np.abs(v[:, 0]), 1)) | (np.isclose(np.abs(v[:, 1]), 1))
    assert on_edge.all()
    assert m.interior_nodes.size == 2 * 3


def test_single_cell():
    m = build_mesh(Rect(0, 1, 0, 1), 1, 1)
    assert m.n_triangles == 2
    assert m.interior_nodes.size == 0


def test_degenerate_inputs():
    with pytest.raises(MeshError):
        build_mesh(Rect(0, 1, 0, 1), 0, 3)
    with pytest.raises((MeshError, ValueError)):
        Rect(1, 0, 0, 1)
    with pytest.raises(MeshError):
        mesh_from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])


def test_triangle_geometry_matches_arrays(square):
    m = build_mesh(square, 3, 3)
    area, grads = triangle_geometry(m, 4)
    assert area == m.areas[4]
    np.testing.assert_array_equal(grads, m.grads[4])


def test_arrays_read_only(square):
    m = build_mesh(square, 2, 2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_dump_format(tmp_path, square):
    m = build_mesh(square, 2, 2)
    path = tmp_path / "m.txt"
    m.dump(path)
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["vertices", "9", "triangles", "8"]
    assert len(lines) == 1 + 9 + 8


def test_two_by_two_enumeration(square):
    m = build_mesh(square, 2, 2)
    assert (m.n_vertices, m.n_triangles) == (9, 8)
    assert m.boundary_mask.sum() == 8
    np.testing.assert_array_equal(m.vertices[m.interior_nodes], [[0.0, 0.0]])


def test_single_cell_all_boundary():
    m = build_mesh(Rect(0, 1, 0, 1), 1, 1)
    assert m.n_vertices == 4 and m.boundary_mask.all()


def test_conforming(square):
    m = build_mesh(square, 5, 3)
    edges = {}
    for tri in m.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            e = tuple(sorted((tri[a], tri[b])))
            edges[e] = edges.get(e, 0) + 1
    counts = np.array(list(edges.values()))
    assert counts.max() == 2
    # edges used once are exactly the boundary edges
    once = [e for e, c in edges.items() if c == 1]
    assert len(once) == 2 * (5 + 3)
    assert all(m.boundary_mask[i] and m.boundary_mask[j] for i, j in once)


def test_scaled_triangle():
    area, grads = geometry_of([[0, 0], [2, 0], [0, 2]])
    assert area == pytest.approx(2.0)
    np.testing.assert_allclose(grads, 0.5 * np.array([[-1, -1], [1, 0], [0, 1]]), atol=1e-15)
