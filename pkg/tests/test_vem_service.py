import numpy as np
import pytest

from app.core.exceptions import QuadratureError
from app.models.mesh import GridSpec
from app.models.vem import CoefficientField, StabScale
from app.problems.circle import CircleProblem
from app.services.mesh_service import build_cut_mesh, integrate_cells, mesh_quadrature, single_cell_mesh
from app.services.vem_service import (
    cell_rot,
    element_matrices,
    element_projection,
    element_rot,
    global_b_matrix,
    global_matrices,
    gradient_matrix,
    interpolate_edge,
    projected_field,
    scatter,
    stab_weights,
)
from tests.helpers import SQUARE, constant_field, line_interface

COEFFS = CoefficientField(alpha_plus=10.0, alpha_minus=1.0, beta_plus=10.0, beta_minus=1.0)


def _cell_edges(mesh, cell):
    return mesh.cell_edges[mesh.cell_ptr[cell]:mesh.cell_ptr[cell + 1]]


def _rotation(points, tags):
    return np.column_stack([-points[:, 1], points[:, 0]]).astype(complex)


def _smooth(points, tags):
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([np.sin(y), x ** 2]).astype(complex)


def _smooth_rot(points):
    return 2.0 * points[:, 0] - np.cos(points[:, 1])


@pytest.mark.parametrize("fixture", ["circle_mesh", "line_mesh", "sliver_mesh"])
def test_projection_reproduces_constants(fixture, request):
    mesh = request.getfixturevalue(fixture)
    c = np.array([1.0 + 2.0j, -0.5j])
    dofs = interpolate_edge(constant_field(c), mesh)
    proj = projected_field(mesh, dofs)
    np.testing.assert_allclose(proj, np.tile(c, (mesh.n_cells, 1)), rtol=0, atol=1e-7)
    np.testing.assert_allclose(cell_rot(mesh, dofs), 0.0, atol=1e-6)


def test_stabilization_vanishes_on_constants(circle_mesh):
    dofs = interpolate_edge(constant_field([0.3, -1.2]), circle_mesh)
    for cell in range(0, circle_mesh.n_cells, 7):
        ops = element_matrices(circle_mesh, cell, COEFFS)
        local = dofs[_cell_edges(circle_mesh, cell)]
        scale = np.linalg.norm(ops.S) * np.linalg.norm(local)
        assert np.linalg.norm(ops.S @ local) <= 1e-12 * scale
        np.testing.assert_allclose(ops.P @ local, [0.3, -1.2], atol=1e-12)


def test_rotation_field_has_unit_rot_two(circle_mesh):
    dofs = interpolate_edge(_rotation, circle_mesh)
    np.testing.assert_allclose(cell_rot(circle_mesh, dofs), 2.0, rtol=1e-10)
    cell = int(np.argmax(circle_mesh.cell_sizes))
    local = dofs[_cell_edges(circle_mesh, cell)]
    assert element_rot(circle_mesh, cell, local) == pytest.approx(2.0)


def test_element_operators_on_unit_square():
    mesh = single_cell_mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ops = element_matrices(mesh, 0, CoefficientField(alpha_plus=2.0, beta_plus=3.0))
    # DoFs globaux de v = (1, 0): bas +1, haut parcouru dans le sens canonique
    dofs = interpolate_edge(constant_field([1.0, 0.0]), mesh)
    local = dofs[_cell_edges(mesh, 0)]
    np.testing.assert_allclose(ops.P @ local, [1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(ops.A, ops.A.T)
    assert np.linalg.matrix_rank(ops.A) == 1
    np.testing.assert_allclose(np.linalg.eigvalsh(ops.A).max(), 2.0 * 4.0)
    np.testing.assert_allclose(ops.M, ops.M.T)
    assert np.linalg.matrix_rank(ops.M.real) == 2
    np.testing.assert_allclose(ops.S, ops.S.T)
    assert np.linalg.eigvalsh(ops.S).min() > -1e-14
    np.testing.assert_allclose(ops.a, ops.A - ops.b)
    np.testing.assert_allclose(element_projection(mesh, 0), ops.P)


def test_rot_of_gradient_vanishes(circle_mesh, rng):
    G = gradient_matrix(circle_mesh)
    q = rng.standard_normal(circle_mesh.n_vertices)
    grad = G @ q
    np.testing.assert_allclose(cell_rot(circle_mesh, grad) * circle_mesh.metrics.area, 0.0, atol=1e-12)
    A = global_matrices(circle_mesh, COEFFS)["A"]
    assert np.abs(A @ grad).max() <= 1e-10 * np.abs(A).max() * np.abs(grad).max()
    np.testing.assert_allclose(G @ np.ones(circle_mesh.n_vertices), 0.0)


def test_rot_of_gradient_vanishes_on_slivers(sliver_mesh, rng):
    q = rng.standard_normal(sliver_mesh.n_vertices)
    grad = gradient_matrix(sliver_mesh) @ q
    np.testing.assert_allclose(cell_rot(sliver_mesh, grad) * sliver_mesh.metrics.area, 0.0, atol=1e-12)


def test_interpolant_commutes_with_rot(circle_mesh):
    dofs = interpolate_edge(_smooth, circle_mesh)
    pts, w, owner = mesh_quadrature(circle_mesh, 8)
    exact = integrate_cells(circle_mesh, _smooth_rot(pts), w, owner)
    np.testing.assert_allclose(cell_rot(circle_mesh, dofs) * circle_mesh.metrics.area, exact, rtol=1e-9, atol=1e-12)


def test_graded_interpolation_near_singular_line(sliver_mesh):
    eps, s = 1e-7, -0.4
    line = line_interface(eps).primitives[0]

    def singular_field(points, tags):
        return np.column_stack([np.abs(points[:, 0] - eps) ** s, np.zeros(points.shape[0])])

    bottom = np.flatnonzero(
        (sliver_mesh.vertices[sliver_mesh.edges[:, 0], 1] == -1.0)
        & (sliver_mesh.vertices[sliver_mesh.edges[:, 1], 1] == -1.0)
    )
    dofs = interpolate_edge(singular_field, sliver_mesh, singular=line, edges=bottom)
    xa = sliver_mesh.vertices[sliver_mesh.edges[bottom, 0], 0]
    xb = sliver_mesh.vertices[sliver_mesh.edges[bottom, 1], 0]
    F = lambda x: np.sign(x - eps) * np.abs(x - eps) ** (1 + s) / (1 + s)
    np.testing.assert_allclose(dofs.real, F(xb) - F(xa), rtol=1e-6)


def test_interpolation_reports_bad_edge(plain_mesh):
    def broken(points, tags):
        out = np.zeros((points.shape[0], 2))
        out[points[:, 0] > 0.9] = np.nan
        return out

    with pytest.raises(QuadratureError) as exc:
        interpolate_edge(broken, plain_mesh)
    assert exc.value.edge is not None


def test_global_matrices_symmetric(circle_mesh):
    coeffs = CoefficientField(beta_plus=1.0 + 2.0j, beta_minus=0.5j)
    mats = global_matrices(circle_mesh, coeffs)
    for mat in mats.values():
        assert abs(mat - mat.T).max() <= 1e-12 * abs(mat).max()


def test_global_matrices_match_element_matrices(circle_mesh):
    blocks_a, blocks_b = [], []
    for cell in range(circle_mesh.n_cells):
        ops = element_matrices(circle_mesh, cell, COEFFS)
        edges = _cell_edges(circle_mesh, cell)[None, :]
        blocks_a.append((edges, ops.A[None].astype(complex)))
        blocks_b.append((edges, ops.b[None]))
    mats = global_matrices(circle_mesh, COEFFS)
    assert abs(mats["A"] - scatter(circle_mesh.n_edges, blocks_a)).max() < 1e-10
    assert abs(mats["B"] - scatter(circle_mesh.n_edges, blocks_b)).max() < 1e-10


PENTAGON = np.array([[0.0, 0.0], [1.0, -0.2], [1.6, 0.7], [0.9, 1.4], [-0.3, 0.8]])


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_element_matrices_scale(s):
    # DoFs ∫_e v·t: P ~ 1/s, r ~ 1/s² donc A ~ 1/s², M et S invariants
    base = element_matrices(single_cell_mesh(PENTAGON), 0, COEFFS)
    scaled = element_matrices(single_cell_mesh(s * PENTAGON), 0, COEFFS)
    np.testing.assert_allclose(scaled.A, base.A / s ** 2, rtol=1e-12)
    np.testing.assert_allclose(scaled.M, base.M, rtol=1e-12, atol=1e-14 * np.abs(base.M).max())
    np.testing.assert_allclose(scaled.S, base.S, rtol=1e-12, atol=1e-14 * np.abs(base.S).max())


@pytest.mark.parametrize(
    "interface",
    [CircleProblem().interface(), line_interface(0.3), line_interface(1e-7)],
    ids=["circle", "line", "sliver"],
)
def test_b_matrix_is_positive_definite(interface):
    mesh = build_cut_mesh(GridSpec.from_h(SQUARE, 0.25), interface)
    assert mesh.grid.nx == mesh.grid.ny == 8
    B = global_b_matrix(mesh, COEFFS).toarray().real
    eig = np.linalg.eigvalsh(B)
    assert eig.min() > 0.0


@pytest.mark.parametrize("interface", [CircleProblem().interface(), line_interface(1e-7)], ids=["circle", "sliver"])
def test_nodal_gradient_form_is_positive_definite(interface):
    mesh = build_cut_mesh(GridSpec.from_h(SQUARE, 0.125), interface)
    assert mesh.grid.nx == 16
    G = gradient_matrix(mesh)[:, np.flatnonzero(~mesh.boundary_vertices)]
    K = (G.T @ global_b_matrix(mesh, COEFFS) @ G).toarray()
    assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
    assert np.linalg.eigvalsh(K.real).min() > 0.0
    assert np.abs(K.imag).max() == 0.0


def test_stab_weights(circle_mesh):
    cells = np.arange(circle_mesh.n_cells)
    np.testing.assert_array_equal(stab_weights(circle_mesh, cells, StabScale.LOCAL_HK), circle_mesh.metrics.diameter)
    np.testing.assert_array_equal(stab_weights(circle_mesh, cells, "global-h"), circle_mesh.h_max)


def test_global_stabilization_matches_local_on_uniform_grid(plain_mesh):
    local = global_b_matrix(plain_mesh, COEFFS, StabScale.LOCAL_HK)
    glob = global_b_matrix(plain_mesh, COEFFS, StabScale.GLOBAL_H)
    assert abs(local - glob).max() < 1e-12
