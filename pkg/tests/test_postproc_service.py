import csv
import math

import numpy as np
import pytest
from loguru import logger

from app.core.exceptions import ConfigError, MeshError
from app.models.geometry import Region
from app.models.mesh import GridSpec
from app.models.vem import CoefficientField
from app.problems.circle import CircleProblem
from app.services import postproc_service
from app.services.mesh_service import build_cut_mesh, single_cell_mesh
from app.services.postproc_service import (
    b_norm,
    compare_fields,
    compute_errors,
    cross_compare,
    cross_compare_report,
    export_field,
    helmholtz_split,
    l2_projected_error,
    locate_cells,
    order_table,
    rot_error,
    write_table_csv,
)
from app.services.vem_service import global_b_matrix, gradient_matrix, interpolate_edge, projected_field
from app.utils.vtk import read_polygon_vtk
from tests.helpers import SQUARE, constant_field


def _zero_rot(points, tags):
    return np.zeros(points.shape[0])


def test_order_table_computes_log2_ratios():
    table = order_table([3, 4, 5], [0.125, 0.0625, 0.03125], [4e-2, 2e-2, 5e-3], [1.0, 0.5, 0.25])
    assert table.l2_orders == [pytest.approx(1.0), pytest.approx(2.0)]
    assert table.rot_orders == [pytest.approx(1.0), pytest.approx(1.0)]
    assert table.rows[0].l2_order is None


def test_order_table_undefined_orders():
    table = order_table([3, 4], [0.125, 0.0625], [0.0, 0.0], [float("nan"), 1.0])
    assert table.l2_orders == [None]
    assert table.rot_orders == [None]


def test_order_table_validation():
    with pytest.raises(ConfigError):
        order_table([3], [0.125], [1.0])
    with pytest.raises(ConfigError):
        order_table([3, 5], [0.125, 0.03125], [1.0, 0.5])


def test_table_csv_marks_missing_orders(tmp_path):
    table = order_table([3, 4], [0.125, 0.0625], [4.7980e-01, 2.4e-01], None)
    path = tmp_path / "table.csv"
    write_table_csv(table, str(path))
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["h", "l2_err", "l2_order", "rot_err", "rot_order"]
    assert rows[1] == ["0.125", "4.7980e-01", "--", "--", "--"]
    assert rows[2][2] == "1.00"


def test_errors_vanish_for_constant_field(circle_mesh):
    c = [1.0, -2.0]
    dofs = interpolate_edge(constant_field(c), circle_mesh)
    report = compute_errors(circle_mesh, dofs, constant_field(c), _zero_rot)
    assert report.l2_proj_error < 1e-10
    assert report.rot_error < 1e-8
    assert l2_projected_error(circle_mesh, dofs, constant_field(c)) == pytest.approx(report.l2_proj_error, abs=1e-14)
    assert rot_error(circle_mesh, dofs, _zero_rot) == pytest.approx(report.rot_error, abs=1e-14)


def test_errors_use_cell_tags_for_branches(circle_mesh):
    # champ constant par région: la branche suit l'étiquette de la cellule
    def field(points, tags):
        out = np.zeros((points.shape[0], 2), dtype=complex)
        out[tags == int(Region.MINUS), 0] = 1.0
        return out

    proj_minus = circle_mesh.tags == int(Region.MINUS)
    dofs = np.zeros(circle_mesh.n_edges, dtype=complex)
    report = compute_errors(circle_mesh, dofs, field, _zero_rot)
    assert report.l2_proj_error == pytest.approx(math.sqrt(circle_mesh.metrics.area[proj_minus].sum()))


def test_rot_error_of_rotation_field(circle_mesh):
    def rotation(points, tags):
        return np.column_stack([-points[:, 1], points[:, 0]]).astype(complex)

    dofs = interpolate_edge(rotation, circle_mesh)
    err = rot_error(circle_mesh, dofs, lambda p, t: np.full(p.shape[0], 2.0))
    assert err < 1e-9


def test_locate_cells_finds_centroids(circle_mesh):
    found = locate_cells(circle_mesh, circle_mesh.metrics.centroid)
    np.testing.assert_array_equal(found, np.arange(circle_mesh.n_cells))


def test_locate_cells_needs_grid():
    mesh = single_cell_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        locate_cells(mesh, np.array([[0.1, 0.1]]))


def test_cross_compare_identical_fields(circle_mesh):
    dofs = interpolate_edge(constant_field([1.0, 1.0j]), circle_mesh)
    report = cross_compare_report((circle_mesh, dofs), (circle_mesh, dofs))
    assert report.l2_proj_error < 1e-12
    assert report.rot_error < 1e-10


def test_cross_compare_across_levels(circle_mesh):
    fine_mesh = build_cut_mesh(GridSpec.from_h(SQUARE, 0.125), CircleProblem().interface())
    c = [0.5, -1.5]
    fine = (fine_mesh, interpolate_edge(constant_field(c), fine_mesh))
    coarse = (circle_mesh, interpolate_edge(constant_field(c), circle_mesh))
    assert cross_compare(fine, coarse) < 1e-9

    shifted = (circle_mesh, interpolate_edge(constant_field([1.5, -1.5]), circle_mesh))
    # ‖(1, 0)‖ sur [-1, 1]² = 2
    assert cross_compare(fine, shifted) == pytest.approx(2.0, rel=1e-9)


def test_compare_fields(circle_mesh):
    c = np.array([2.0, 1.0])
    dofs = interpolate_edge(constant_field(c), circle_mesh)
    means = np.tile(c, (circle_mesh.n_cells, 1)).astype(complex)
    assert compare_fields(circle_mesh, dofs, means) < 1e-10
    assert compare_fields(circle_mesh, dofs, 2.0 * means) == pytest.approx(0.5, rel=1e-9)


def test_b_norm_is_positive(circle_mesh, rng):
    coeffs = CoefficientField(beta_plus=2.0, beta_minus=1.0)
    v = rng.standard_normal(circle_mesh.n_edges)
    assert b_norm(circle_mesh, v, coeffs) > 0.0
    assert b_norm(circle_mesh, 3.0 * v, coeffs) == pytest.approx(3.0 * b_norm(circle_mesh, v, coeffs))


def test_helmholtz_split_is_b_orthogonal(circle_mesh, rng):
    coeffs = CoefficientField(beta_plus=2.0, beta_minus=1.0)
    v = rng.standard_normal(circle_mesh.n_edges) + 0j
    w, q, rel = helmholtz_split(circle_mesh, v, coeffs)
    assert rel <= 1e-9
    G = gradient_matrix(circle_mesh)
    np.testing.assert_allclose(w + G @ q, v, atol=1e-12)
    np.testing.assert_array_equal(q[circle_mesh.boundary_vertices], 0.0)

    B = global_b_matrix(circle_mesh, coeffs)
    interior = G[:, np.flatnonzero(~circle_mesh.boundary_vertices)]
    residual = np.abs(interior.T @ (B @ w)).max()
    assert residual <= 1e-9 * np.abs(B @ v).max()


class _ZeroSolve:
    def __init__(self, K):
        self.n = K.shape[0]

    def solve(self, rhs):
        return np.zeros(self.n, dtype=complex)


def test_helmholtz_split_warns_on_residual(circle_mesh, rng, monkeypatch):
    monkeypatch.setattr(postproc_service, "splu", _ZeroSolve)
    messages = []
    handler = logger.add(messages.append, level="WARNING", format="{message}")
    try:
        v = rng.standard_normal(circle_mesh.n_edges) + 0j
        w, q, rel = helmholtz_split(circle_mesh, v, CoefficientField())
    finally:
        logger.remove(handler)
    np.testing.assert_array_equal(q, 0.0)
    assert rel == pytest.approx(1.0)
    assert len(messages) == 1
    assert "orthogonality residual" in messages[0]


def test_export_field(tmp_path, circle_mesh):
    dofs = interpolate_edge(constant_field([1.0 + 1.0j, 2.0]), circle_mesh)
    path = tmp_path / "field.vtk"
    export_field(circle_mesh, dofs, str(path))
    data = read_polygon_vtk(str(path))
    assert set(data["cell_data"]) == {"rot", "re_proj", "im_proj"}
    proj = projected_field(circle_mesh, dofs)
    np.testing.assert_allclose(data["cell_data"]["re_proj"][:, :2], proj.real, atol=1e-12)
    np.testing.assert_allclose(data["cell_data"]["im_proj"][:, :2], proj.imag, atol=1e-12)
    assert data["cell_data"]["rot"].shape == (circle_mesh.n_cells, 2)
