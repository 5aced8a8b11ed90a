import numpy as np
import pytest

from smoothfem.mesh import (
    Mesh,
    MeshFormatError,
    NonManifoldError,
    SingularGeometryError,
    barycentric_gradients,
    builtin_mesh,
    enumerate_faces,
    load_mesh,
    parse_mesh_spec,
    write_mesh,
)

from conftest import random_simplex


def test_square_counts():
    mesh = builtin_mesh("square", 2)
    table = enumerate_faces(mesh)
    assert [table.count(ell) for ell in range(3)] == [9, 16, 8]
    assert table.boundary[1].sum() == 8
    assert table.boundary[0].sum() == 8


def test_square_cell_split():
    mesh = builtin_mesh("square", 1)
    np.testing.assert_allclose(mesh.element_vertices()[0], [[0, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(mesh.element_vertices()[1], [[1, 0], [1, 1], [0, 1]])


def test_cube_counts():
    mesh = builtin_mesh("cube", 1)
    table = enumerate_faces(mesh)
    assert [table.count(ell) for ell in range(4)] == [8, 19, 18, 6]
    assert table.boundary[2].sum() == 12
    vol = barycentric_gradients(mesh.element_vertices()).measure
    np.testing.assert_allclose(vol, 1 / 6)


@pytest.mark.parametrize("kind,n", [("interval", 3), ("square", 3), ("cube", 2)])
def test_meshes_tile_domain(kind, n):
    mesh = builtin_mesh(kind, n)
    geo = barycentric_gradients(mesh.element_vertices())
    assert np.all(geo.measure > 0)
    assert geo.measure.sum() == pytest.approx(1.0)
    assert mesh.h() == pytest.approx(np.sqrt(mesh.dim) / n)


@pytest.mark.parametrize("kind,n", [("square", 3), ("cube", 2)])
def test_euler_characteristic(kind, n):
    table = enumerate_faces(builtin_mesh(kind, n))
    chi = sum((-1) ** ell * table.count(ell) for ell in range(len(table.faces)))
    assert chi == 1


def test_face_permutations_sort_vertices():
    mesh = builtin_mesh("cube", 2)
    table = enumerate_faces(mesh)
    for ell in range(4):
        from smoothfem.lattice import local_faces

        loc = np.array(local_faces(3, ell))
        verts = mesh.elements[:, loc]
        srt = np.take_along_axis(verts, table.element_perm[ell], axis=2)
        np.testing.assert_array_equal(srt, table.faces[ell][table.element_faces[ell]])


@pytest.mark.parametrize("d", [1, 2, 3])
def test_barycentric_gradients(rng, d):
    x = random_simplex(rng, d)
    geo = barycentric_gradients(x[None])
    g = geo.grads[0]
    # grad lambda_i . (x_j - x_0) = delta_ij - delta_i0
    E = x[1:] - x[0]
    np.testing.assert_allclose(g[1:] @ E.T, np.eye(d), atol=1e-12)
    np.testing.assert_allclose(g.sum(axis=0), 0, atol=1e-12)


def test_degenerate_element_rejected():
    x = np.array([[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]])
    with pytest.raises(SingularGeometryError):
        barycentric_gradients(x)


def test_non_manifold_rejected():
    nodes = np.array([[0, 0], [1, 0], [0, 1], [0, -1], [1, 1.0]])
    elems = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(NonManifoldError):
        enumerate_faces(Mesh(nodes, elems))


def test_file_roundtrip(tmp_path):
    mesh = builtin_mesh("square", 2)
    p = tmp_path / "m.txt"
    write_mesh(mesh, p)
    text = "# a comment\n" + p.read_text()
    p.write_text(text)
    back = load_mesh(p)
    np.testing.assert_array_equal(back.nodes, mesh.nodes)
    np.testing.assert_array_equal(back.elements, mesh.elements)


def test_bad_file(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 3 1\n0 0\n1 0\n0 1\n")
    with pytest.raises(MeshFormatError):
        load_mesh(p)


def test_parse_mesh_spec():
    assert parse_mesh_spec("builtin:square:4") == ("square", 4, None)
    assert parse_mesh_spec("builtin:cube") == ("cube", None, None)
    assert parse_mesh_spec("file:/tmp/x.msh") == ("file", None, "/tmp/x.msh")
    with pytest.raises(ValueError):
        parse_mesh_spec("square")
