import numpy as np
import pytest

from app.models.vem import CoefficientField
from app.services.mesh_service import single_cell_mesh
from app.services.nedelec_service import (
    _basis_at,
    barycentric_gradients,
    nd0_cell_means,
    nd0_errors,
    nd0_solve,
    parent_means,
    triangulate_mesh,
    whitney_matrices,
)
from app.services.vem_service import element_matrices, interpolate_edge
from app.utils.quadrature import triangle_points
from tests.helpers import constant_field

C = np.array([1.0 - 0.5j, 0.25 + 2.0j])


def _random_triangles(rng, n):
    coords = rng.uniform(-1.0, 1.0, size=(n, 3, 2))
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    cw = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0.0
    coords[cw] = coords[cw][:, ::-1]
    return coords


def test_vem_rot_matrix_equals_whitney_on_triangles(rng):
    coords = _random_triangles(rng, 100)
    K, _ = whitney_matrices(coords)
    for t in range(coords.shape[0]):
        mesh = single_cell_mesh(coords[t])
        signs = mesh.cell_signs.astype(float)
        ops = element_matrices(mesh, 0, CoefficientField())
        np.testing.assert_allclose(ops.A, K[t] * np.outer(signs, signs), rtol=1e-10)


def test_whitney_tangential_dofs_are_kronecker(rng):
    coords = _random_triangles(rng, 10)
    for t in range(coords.shape[0]):
        tri = coords[t]
        for j in range(3):
            a, b = tri[j], tri[(j + 1) % 3]
            mid = 0.5 * (a + b)
            phi = _basis_at(tri[None], mid[None])[0]
            # φ linéaire: point milieu exact
            np.testing.assert_allclose(phi @ (b - a), np.eye(3)[j], atol=1e-10)


def test_whitney_mass_and_means_match_quadrature(rng):
    coords = _random_triangles(rng, 5)
    _, M = whitney_matrices(coords)
    pts, w = triangle_points(coords, 4)
    grads, area = barycentric_gradients(coords)
    for t in range(coords.shape[0]):
        phi = _basis_at(np.repeat(coords[t][None], pts.shape[1], axis=0), pts[t])
        mass = np.einsum("q,qid,qjd->ij", w[t], phi, phi)
        np.testing.assert_allclose(M[t], mass, rtol=1e-10, atol=1e-12)
        mean = np.einsum("q,qid->id", w[t], phi) / area[t]
        expected = (grads[t, [1, 2, 0]] - grads[t, [0, 1, 2]]) / 3.0
        np.testing.assert_allclose(mean, expected, rtol=1e-10, atol=1e-12)


def test_triangulation_is_conforming_refinement(circle_mesh):
    tri = triangulate_mesh(circle_mesh)
    assert np.all(tri.mesh.cell_sizes == 3)
    per_parent = np.bincount(tri.parent, weights=tri.mesh.metrics.area, minlength=circle_mesh.n_cells)
    np.testing.assert_allclose(per_parent, circle_mesh.metrics.area, rtol=1e-12)
    np.testing.assert_array_equal(tri.mesh.tags, circle_mesh.tags[tri.parent])
    assert tri.mesh.boundary_edges.sum() == circle_mesh.boundary_edges.sum()
    assert tri.triangles.shape == (tri.n_triangles, 3)


def test_triangulation_of_slivers(sliver_mesh):
    tri = triangulate_mesh(sliver_mesh)
    assert tri.mesh.metrics.area.min() > 0.0
    assert tri.mesh.metrics.area.sum() == pytest.approx(4.0, rel=1e-12)


@pytest.mark.parametrize(
    "coeffs",
    [
        CoefficientField(alpha_plus=10.0, alpha_minus=1.0, beta_plus=10.0, beta_minus=1.0),
        CoefficientField.from_physics(omega=2.0, eps_plus=1.0, eps_minus=1.0, sigma_plus=0.1, sigma_minus=1.0),
    ],
)
def test_nd0_patch_test(circle_mesh, coeffs):
    tri = triangulate_mesh(circle_mesh)

    def source(points, tags):
        return -coeffs.beta(tags)[:, None] * np.tile(C, (points.shape[0], 1))

    solution = nd0_solve(tri, coeffs, source, g=constant_field(C))
    expected = interpolate_edge(constant_field(C), tri.mesh)
    assert np.linalg.norm(solution.dofs - expected) <= 1e-9 * np.linalg.norm(expected)

    means = nd0_cell_means(tri, solution.dofs)
    np.testing.assert_allclose(means, np.tile(C, (tri.n_triangles, 1)), atol=1e-8)
    np.testing.assert_allclose(parent_means(tri, means, circle_mesh.n_cells), np.tile(C, (circle_mesh.n_cells, 1)), atol=1e-8)

    errors = nd0_errors(tri, solution.dofs, constant_field(C), lambda p, t: np.zeros(p.shape[0]))
    assert errors.l2_proj_error < 1e-8
    assert errors.rot_error < 1e-6


def test_parent_means_are_area_weighted(circle_mesh):
    tri = triangulate_mesh(circle_mesh)
    means = np.zeros((tri.n_triangles, 2), dtype=complex)
    means[:, 0] = tri.mesh.metrics.area
    out = parent_means(tri, means, circle_mesh.n_cells)
    area2 = np.bincount(tri.parent, weights=tri.mesh.metrics.area ** 2, minlength=circle_mesh.n_cells)
    np.testing.assert_allclose(out[:, 0], area2 / circle_mesh.metrics.area, rtol=1e-10)
