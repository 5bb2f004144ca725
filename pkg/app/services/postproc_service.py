"""
Service post-traitement: normes d'erreur, tables de convergence,
comparaison à une solution de référence, décomposition de Helmholtz
discrète et export des champs.

L'erreur L² rapportée est toujours ‖u - Π_h u_h‖₀: la fonction virtuelle
n'est jamais évaluée ponctuellement.
"""
import csv
import math
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.sparse.linalg import splu

from app.core.config import HELMHOLTZ_TOL, QUAD_ORDER
from app.core.exceptions import ConfigError, ExportError, MeshError, SingularSystemError
from app.models.geometry import Line
from app.models.mesh import PolyMesh
from app.models.postproc import ConvergenceRow, ConvergenceTable, ErrorReport
from app.models.vem import CoefficientField, StabScale
from app.services.geometry_service import points_in_polygon
from app.services.mesh_service import mesh_quadrature, mesh_triangles
from app.services.vem_service import (
    VectorField,
    cell_rot,
    global_b_matrix,
    gradient_matrix,
    projected_field,
)
from app.utils.quadrature import triangle_points
from app.utils.vtk import write_polygon_vtk

ScalarField = VectorField
CONTAINMENT_TOL = 1e-12
COMPARE_CHUNK = 50000


# =============================================================================
# NORMES D'ERREUR
# =============================================================================

def l2_projected_error(
    mesh: PolyMesh,
    dofs: np.ndarray,
    u_exact: VectorField,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
) -> float:
    """
    sqrt(Σ_K ∫_K |u - Π_K u_h|²); la branche de u est choisie par
    l'étiquette de la cellule, jamais par un test de côté.
    """
    pts, w, owner = mesh_quadrature(mesh, quad_order, singular=singular)
    proj = projected_field(mesh, dofs)
    diff = np.asarray(u_exact(pts, mesh.tags[owner]), dtype=complex) - proj[owner]
    return float(np.sqrt(np.dot(w, np.sum(np.abs(diff) ** 2, axis=1))))


def rot_error(
    mesh: PolyMesh,
    dofs: np.ndarray,
    rot_exact: ScalarField,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
) -> float:
    pts, w, owner = mesh_quadrature(mesh, quad_order, singular=singular)
    rot_h = cell_rot(mesh, dofs)
    diff = np.asarray(rot_exact(pts, mesh.tags[owner]), dtype=complex) - rot_h[owner]
    return float(np.sqrt(np.dot(w, np.abs(diff) ** 2)))


def b_norm(
    mesh: PolyMesh,
    dofs: np.ndarray,
    coeffs: CoefficientField,
    stab: StabScale = StabScale.LOCAL_HK,
) -> float:
    """‖v‖_b = sqrt(b_h(v, v̄)), réel et positif pour β > 0."""
    B = global_b_matrix(mesh, coeffs, stab)
    return float(np.sqrt(abs(np.vdot(dofs, B @ dofs))))


def compute_errors(
    mesh: PolyMesh,
    dofs: np.ndarray,
    u_exact: VectorField,
    rot_exact: ScalarField,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
) -> ErrorReport:
    """Les deux erreurs sur une seule quadrature."""
    pts, w, owner = mesh_quadrature(mesh, quad_order, singular=singular)
    tags = mesh.tags[owner]
    du = np.asarray(u_exact(pts, tags), dtype=complex) - projected_field(mesh, dofs)[owner]
    dr = np.asarray(rot_exact(pts, tags), dtype=complex) - cell_rot(mesh, dofs)[owner]
    return ErrorReport(
        l2_proj_error=float(np.sqrt(np.dot(w, np.sum(np.abs(du) ** 2, axis=1)))),
        rot_error=float(np.sqrt(np.dot(w, np.abs(dr) ** 2))),
    )


# =============================================================================
# TABLES DE CONVERGENCE
# =============================================================================

def _order(e0: float, e1: float) -> Optional[float]:
    if not (np.isfinite(e0) and np.isfinite(e1)) or e0 <= 0.0 or e1 <= 0.0:
        return None
    return math.log2(e0 / e1)


def order_table(
    levels: Sequence[int],
    hs: Sequence[float],
    l2_errs: Sequence[float],
    rot_errs: Optional[Sequence[float]] = None,
) -> ConvergenceTable:
    """
    Ordres log2(e_k / e_{k+1}); h doit être divisé par deux à chaque niveau.

    Une erreur nulle (ou absente) rend l'ordre indéfini (None).
    """
    if len(hs) < 2:
        raise ConfigError("Convergence table needs at least 2 levels", field="levels")
    for h0, h1 in zip(hs, hs[1:]):
        if abs(h0 / h1 - 2.0) > 1e-9:
            raise ConfigError(f"Mesh sizes must halve between levels (got {h0} -> {h1})", field="levels")
    rot_errs = list(rot_errs) if rot_errs is not None else [float("nan")] * len(hs)

    rows = []
    for i, (k, h, e, r) in enumerate(zip(levels, hs, l2_errs, rot_errs)):
        rows.append(ConvergenceRow(
            level=int(k),
            h=float(h),
            l2_err=float(e),
            l2_order=None if i == 0 else _order(l2_errs[i - 1], e),
            rot_err=float(r),
            rot_order=None if i == 0 else _order(rot_errs[i - 1], r),
        ))
    return ConvergenceTable(rows=rows)


def _cell(value: Optional[float], fmt: str) -> str:
    if value is None or not np.isfinite(value):
        return "--"
    return fmt % value


def write_table_csv(table: ConvergenceTable, path: str) -> None:
    """CSV "h,l2_err,l2_order,rot_err,rot_order", ordres indéfinis notés "--"."""
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["h", "l2_err", "l2_order", "rot_err", "rot_order"])
            for row in table.rows:
                writer.writerow([
                    "%.6g" % row.h,
                    _cell(row.l2_err, "%.4e"),
                    _cell(row.l2_order, "%.2f"),
                    _cell(row.rot_err, "%.4e"),
                    _cell(row.rot_order, "%.2f"),
                ])
    except OSError as exc:
        raise ExportError(f"Cannot write convergence table {path}: {exc}") from exc


# =============================================================================
# COMPARAISON À UNE RÉFÉRENCE
# =============================================================================

def locate_cells(mesh: PolyMesh, points: np.ndarray) -> np.ndarray:
    """
    Cellule contenant chaque point: cellule de fond par la grille, puis test
    d'appartenance parmi ses filles (tolérance CONTAINMENT_TOL).

    Raises:
        MeshError: point hors de toutes les cellules.
    """
    if mesh.grid is None or mesh.background is None:
        raise MeshError("Point location needs a background grid")
    bg = mesh.grid.locate(points)
    index = mesh.background_index
    out = np.full(points.shape[0], -1, dtype=np.int64)

    n_bg = mesh.grid.nx * mesh.grid.ny
    n_children = np.bincount(mesh.background, minlength=n_bg)
    first_child = np.full(n_bg, -1, dtype=np.int64)
    keys, first = np.unique(mesh.background, return_index=True)
    first_child[keys] = first

    single = n_children[bg] == 1
    out[single] = first_child[bg[single]]

    multi = np.flatnonzero(~single)
    if multi.size:
        order = np.argsort(bg[multi], kind="stable")
        multi = multi[order]
        keys, starts = np.unique(bg[multi], return_index=True)
        bounds = np.append(starts, multi.size)
        for i, key in enumerate(keys):
            idx = multi[bounds[i]:bounds[i + 1]]
            pending = idx
            for c in index.get(int(key), ()):
                if pending.size == 0:
                    break
                inside = points_in_polygon(points[pending], mesh.vertices[mesh.cell_loop(c)], tol=CONTAINMENT_TOL)
                out[pending[inside]] = c
                pending = pending[~inside]

    if np.any(out < 0):
        bad = points[np.flatnonzero(out < 0)[0]]
        raise MeshError(f"Quadrature point ({bad[0]:.6g}, {bad[1]:.6g}) outside all coarse cells")
    return out


def cross_compare_report(
    fine: Tuple[PolyMesh, np.ndarray],
    coarse: Tuple[PolyMesh, np.ndarray],
    quad_order: int = QUAD_ORDER,
) -> ErrorReport:
    """
    ‖Π_h u_h^fine - Π_h u_h^coarse‖₀ et ‖rot u_h^fine - rot u_h^coarse‖₀,
    intégrés sur la quadrature du maillage fin; les points sont localisés
    dans le maillage grossier.
    """
    fine_mesh, fine_dofs = fine
    coarse_mesh, coarse_dofs = coarse
    fine_proj = projected_field(fine_mesh, fine_dofs)
    coarse_proj = projected_field(coarse_mesh, coarse_dofs)
    fine_rot = cell_rot(fine_mesh, fine_dofs)
    coarse_rot = cell_rot(coarse_mesh, coarse_dofs)

    tris, owner = mesh_triangles(fine_mesh)
    l2 = 0.0
    rot = 0.0
    for start in range(0, tris.shape[0], COMPARE_CHUNK):
        sl = slice(start, start + COMPARE_CHUNK)
        pts, w = triangle_points(tris[sl], quad_order)
        q = pts.shape[1]
        pts = pts.reshape(-1, 2)
        w = w.ravel()
        cells = np.repeat(owner[sl], q)
        located = locate_cells(coarse_mesh, pts)
        diff = fine_proj[cells] - coarse_proj[located]
        l2 += float(np.dot(w, np.sum(np.abs(diff) ** 2, axis=1)))
        rot += float(np.dot(w, np.abs(fine_rot[cells] - coarse_rot[located]) ** 2))
    return ErrorReport(l2_proj_error=float(np.sqrt(l2)), rot_error=float(np.sqrt(rot)))


def cross_compare(
    fine: Tuple[PolyMesh, np.ndarray],
    coarse: Tuple[PolyMesh, np.ndarray],
    quad_order: int = QUAD_ORDER,
) -> float:
    """‖Π_h u_h^fine - Π_h u_h^coarse‖₀ sur la quadrature du maillage fin."""
    return cross_compare_report(fine, coarse, quad_order).l2_proj_error


def compare_fields(mesh: PolyMesh, dofs: np.ndarray, cell_means: np.ndarray) -> float:
    """Différence L² relative entre Π_h u_h et des moyennes par cellule (C, 2)."""
    proj = projected_field(mesh, dofs)
    area = mesh.metrics.area
    num = np.dot(area, np.sum(np.abs(proj - cell_means) ** 2, axis=1))
    den = np.dot(area, np.sum(np.abs(cell_means) ** 2, axis=1))
    return float(np.sqrt(num / den)) if den > 0.0 else float(np.sqrt(num))


# =============================================================================
# DÉCOMPOSITION DE HELMHOLTZ DISCRÈTE
# =============================================================================

def helmholtz_split(
    mesh: PolyMesh,
    dofs: np.ndarray,
    coeffs: CoefficientField,
    stab: StabScale = StabScale.LOCAL_HK,
    tol: float = HELMHOLTZ_TOL,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    v_h = w_h + ∇q_h avec q_h nodal nul au bord et
    b_h(∇q_h, ∇s_h) = b_h(v_h, ∇s_h) pour tout s_h.

    Returns:
        (w_h, q_h, résidu) en DoFs d'arête et nodaux; le résidu
        max|b_h(w_h, ∇s_h)| est relatif à max|b_h(v_h, ∇s_h)|.
    """
    B = global_b_matrix(mesh, coeffs, stab)
    G = gradient_matrix(mesh)
    free = np.flatnonzero(~mesh.boundary_vertices)
    Gf = G[:, free]
    K = (Gf.T @ B @ Gf).tocsc()
    rhs = Gf.T @ (B @ dofs)

    q = np.zeros(mesh.n_vertices, dtype=complex)
    if free.size:
        try:
            q[free] = splu(K).solve(np.asarray(rhs, dtype=complex))
        except RuntimeError as exc:
            raise SingularSystemError(f"Singular nodal system in Helmholtz split ({exc})") from exc
    w = dofs - G @ q

    residual = 0.0
    if free.size:
        scale = float(np.abs(rhs).max())
        residual = float(np.abs(Gf.T @ (B @ w)).max()) / (scale if scale > 0.0 else 1.0)
    if residual > tol:
        logger.warning("Helmholtz split: orthogonality residual {:.2e} above {:.0e}", residual, tol)
    else:
        logger.debug("Helmholtz split: {} nodal unknowns, orthogonality residual {:.2e}", free.size, residual)
    return w, q, residual


# =============================================================================
# EXPORT
# =============================================================================

def export_field(mesh: PolyMesh, dofs: np.ndarray, path: str) -> None:
    """VTK: Re Π_K u_h, Im Π_K u_h (VECTORS) et rot u_h (Re, Im)."""
    proj = projected_field(mesh, dofs)
    rot = cell_rot(mesh, dofs)
    loops = [mesh.cell_loop(c) for c in range(mesh.n_cells)]
    write_polygon_vtk(
        path,
        mesh.vertices,
        loops,
        cell_scalars={"rot": np.column_stack([rot.real, rot.imag])},
        cell_vectors={"re_proj": proj.real, "im_proj": proj.imag},
        title="H(rot) VEM field",
    )
