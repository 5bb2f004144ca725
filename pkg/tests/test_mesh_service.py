import math

import numpy as np
import pytest

from app.core.exceptions import ConfigError, MeshTopologyError, TangentCutError
from app.models.geometry import Circle, InterfaceSpec, Region
from app.models.mesh import GridSpec
from app.problems.circle import CircleProblem
from app.services.mesh_service import (
    build_cut_mesh,
    build_polymesh,
    dof_map,
    euler_characteristic,
    integrate_cells,
    interface_mismatch,
    mesh_quadrature,
    mesh_triangles,
    single_cell_mesh,
    write_mesh_vtk,
)
from app.utils.vtk import read_polygon_vtk
from tests.helpers import SQUARE, line_interface


def _check_complex(mesh):
    assert euler_characteristic(mesh) == 1
    counts = np.bincount(mesh.cell_edges, minlength=mesh.n_edges)
    assert counts.max() <= 2
    np.testing.assert_array_equal(counts == 1, mesh.boundary_edges)
    sign_sum = np.bincount(mesh.cell_edges, weights=mesh.cell_signs, minlength=mesh.n_edges)
    assert np.all(sign_sum[~mesh.boundary_edges] == 0)
    assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])
    assert np.all(mesh.metrics.area > 0.0)


def test_plain_grid(plain_mesh):
    _check_complex(plain_mesh)
    assert plain_mesh.n_cells == 64
    assert plain_mesh.boundary_edges.sum() == 32
    assert plain_mesh.interface_edges.sum() == 0
    assert plain_mesh.metrics.area.sum() == pytest.approx(4.0)
    np.testing.assert_allclose(plain_mesh.metrics.star_radius, 0.125)


@pytest.mark.parametrize("fixture", ["circle_mesh", "line_mesh", "sliver_mesh", "circle_mesh_fine"])
def test_cut_meshes_are_conforming(fixture, request):
    mesh = request.getfixturevalue(fixture)
    _check_complex(mesh)
    assert mesh.metrics.area.sum() == pytest.approx(4.0, rel=1e-12)
    assert mesh.interface_edges.any()


def test_circle_area_converges_quadratically(circle_mesh_fine):
    mesh = circle_mesh_fine
    r0 = CircleProblem().r0
    inner = mesh.metrics.area[mesh.tags == int(Region.MINUS)].sum()
    h = mesh.grid.h
    assert abs(inner - math.pi * r0 ** 2) < h ** 2


def test_interface_edges_approximate_circle(circle_mesh_fine):
    spec = CircleProblem().interface()
    gap, ratio = interface_mismatch(circle_mesh_fine, spec)
    assert gap > 0.0
    assert ratio < 0.5
    ends = circle_mesh_fine.vertices[circle_mesh_fine.edges[circle_mesh_fine.interface_edges].ravel()]
    np.testing.assert_allclose(np.hypot(ends[:, 0], ends[:, 1]), spec.primitives[0].radius, atol=1e-12)


def test_sliver_cells_kept(sliver_mesh):
    widths = sliver_mesh.metrics.star_radius * 2.0
    assert widths.min() == pytest.approx(1e-7, rel=1e-6)
    tags = sliver_mesh.tags[sliver_mesh.metrics.centroid[:, 0] > 1e-7]
    assert np.all(tags == int(Region.MINUS))


def test_build_is_deterministic():
    grid = GridSpec.from_h(SQUARE, 0.125)
    spec = CircleProblem().interface()
    a = build_cut_mesh(grid, spec)
    b = build_cut_mesh(grid, spec)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.cell_vertices, b.cell_vertices)
    np.testing.assert_array_equal(a.edges, b.edges)
    np.testing.assert_array_equal(a.tags, b.tags)


def test_vertices_in_lexicographic_order(circle_mesh):
    v = circle_mesh.vertices
    order = np.lexsort((v[:, 1], v[:, 0]))
    np.testing.assert_array_equal(order, np.arange(v.shape[0]))


def test_tangent_cut_names_cell():
    grid = GridSpec(0.0, 1.0, 0.0, 1.0, 2, 2)
    spec = InterfaceSpec(primitives=(Circle((0.25, -0.3), 0.35),), minus_clauses=((0,),))
    with pytest.raises(TangentCutError) as exc:
        build_cut_mesh(grid, spec)
    assert exc.value.cell == 0
    assert "(0, 0)" in str(exc.value)


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec(0.0, 1.0, 0.0, 1.0, 1, 4)
    with pytest.raises(ConfigError):
        GridSpec(1.0, 0.0, 0.0, 1.0, 4, 4)


def test_single_cell_and_orientation():
    mesh = single_cell_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert mesh.n_edges == 3
    # arête locale 2 (sommet 2 -> 0) parcourue contre l'orientation canonique
    assert list(mesh.cell_signs) == [1, 1, -1]
    assert mesh.boundary_edges.all()


def test_polymesh_rejects_bad_complex():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    # deux triangles parcourant la diagonale dans le même sens
    with pytest.raises(MeshTopologyError):
        build_polymesh(v, np.array([0, 3, 6]), np.array([0, 1, 2, 0, 3, 2]), np.ones(2))
    # boucle horaire
    with pytest.raises(MeshTopologyError):
        build_polymesh(v, np.array([0, 4]), np.array([0, 3, 2, 1]), np.ones(1))


def test_dof_map(circle_mesh):
    dofs = dof_map(circle_mesh)
    assert dofs.n_edge_dofs == circle_mesh.n_edges
    assert dofs.free_edges.shape[0] == circle_mesh.n_edges - 32
    assert dofs.free_nodes.shape[0] == circle_mesh.n_vertices - 32


def test_mesh_triangles_cover_cells(circle_mesh):
    tris, owner = mesh_triangles(circle_mesh)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    assert area.min() > 0.0
    per_cell = np.bincount(owner, weights=area, minlength=circle_mesh.n_cells)
    np.testing.assert_allclose(per_cell, circle_mesh.metrics.area, rtol=1e-12)


def test_mesh_quadrature_integrates_polynomials(circle_mesh):
    pts, w, owner = mesh_quadrature(circle_mesh, 4)
    assert w.sum() == pytest.approx(4.0)
    first = integrate_cells(circle_mesh, pts[:, 0], w, owner)
    np.testing.assert_allclose(first, circle_mesh.metrics.area * circle_mesh.metrics.centroid[:, 0], atol=1e-14)
    assert np.dot(w, pts[:, 0] ** 2 * pts[:, 1] ** 2) == pytest.approx(4.0 / 9.0)


def test_graded_quadrature_on_singular_line(sliver_mesh):
    line = line_interface(1e-7).primitives[0]
    pts, w, owner = mesh_quadrature(sliver_mesh, 7, singular=line)
    assert w.sum() == pytest.approx(4.0)
    s = -0.4
    vals = np.abs(pts[:, 0] - 1e-7) ** s
    # ∫_{-1}^{1} |x - ε|^s dx × 2
    exact = 2.0 * ((1.0 - 1e-7) ** (1 + s) + (1.0 + 1e-7) ** (1 + s)) / (1 + s)
    assert np.dot(w, vals) == pytest.approx(exact, rel=1e-6)


def test_adaptive_quadrature_resolves_sharp_source(plain_mesh):
    width = 0.05

    def sharp(points, owner):
        return np.exp(-((points[:, 0] - 0.3) ** 2) / width ** 2)

    pts, w, owner = mesh_quadrature(plain_mesh, 5, sharp=sharp)
    exact = 2.0 * width * math.sqrt(math.pi)
    assert np.dot(w, sharp(pts, owner)) == pytest.approx(exact, rel=1e-4)
    np.testing.assert_allclose(np.bincount(owner, weights=w, minlength=plain_mesh.n_cells), 0.0625)


def test_mesh_vtk_export(tmp_path, circle_mesh):
    path = tmp_path / "mesh.vtk"
    write_mesh_vtk(circle_mesh, str(path))
    data = read_polygon_vtk(str(path))
    assert len(data["cells"]) == circle_mesh.n_cells
    np.testing.assert_array_equal(data["points"][:, :2], circle_mesh.vertices)
    np.testing.assert_array_equal(data["cell_data"]["region"].ravel(), circle_mesh.tags)
