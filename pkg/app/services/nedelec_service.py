"""
Service Nédélec: éléments d'arête de première espèce d'ordre le plus bas
sur une triangulation conforme du maillage coupé. Sert d'oracle
indépendant pour la VEM.

Base de Whitney de l'arête locale k (sommets a = k, b = k+1):
    φ_k = λ_a ∇λ_b - λ_b ∇λ_a,  ∫_e φ_k·t ds = 1,  rot φ_k = 1/|T| (T CCW).
"""
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from app.core.config import QUAD_ORDER
from app.models.geometry import Line, Polygon
from app.models.mesh import PolyMesh
from app.models.nedelec import Nd0Solution, TriMesh
from app.models.postproc import ErrorReport
from app.models.system import LinearSystem
from app.models.vem import CoefficientField
from app.services.geometry_service import centroid_in_kernel, triangulate
from app.services.mesh_service import build_polymesh, integrate_cells, mesh_quadrature
from app.services.system_service import set_tangential_bc, solve
from app.services.vem_service import VectorField, scatter

_LOCAL = np.array([[0, 1], [1, 2], [2, 0]])


# =============================================================================
# TRIANGULATION
# =============================================================================

def _is_strictly_convex(v: np.ndarray) -> bool:
    a = np.roll(v, 1, axis=0)
    c = np.roll(v, -1, axis=0)
    cross = (v[:, 0] - a[:, 0]) * (c[:, 1] - v[:, 1]) - (v[:, 1] - a[:, 1]) * (c[:, 0] - v[:, 0])
    return bool(np.all(cross > 0.0))


def triangulate_mesh(mesh: PolyMesh) -> TriMesh:
    """
    Triangles: cellule gardée si triangle, quadrilatère strictement convexe
    coupé par la diagonale 0-2, éventail depuis un sommet centroïde ajouté
    sinon (ear clipping si le centroïde n'est pas dans le noyau).
    Les arêtes des cellules sont conservées: la triangulation est conforme.
    """
    vertices: List[np.ndarray] = [mesh.vertices]
    n_vertices = mesh.n_vertices
    tris: List[Tuple[int, int, int]] = []
    parent: List[int] = []
    for c in range(mesh.n_cells):
        loop = mesh.cell_loop(c)
        coords = mesh.vertices[loop]
        n = loop.shape[0]
        if n == 3:
            tris.append(tuple(int(v) for v in loop))
            parent.append(c)
        elif n == 4 and _is_strictly_convex(coords):
            tris.extend([(loop[0], loop[1], loop[2]), (loop[0], loop[2], loop[3])])
            parent.extend([c, c])
        elif centroid_in_kernel(coords, mesh.metrics.centroid[c]):
            vertices.append(mesh.metrics.centroid[c][None, :])
            center = n_vertices
            n_vertices += 1
            for k in range(n):
                tris.append((center, loop[k], loop[(k + 1) % n]))
                parent.append(c)
        else:
            ids = {tuple(p): int(v) for p, v in zip(coords, loop)}
            for tri in triangulate(Polygon(coords)):
                tris.append(tuple(ids[tuple(p)] for p in tri))
                parent.append(c)

    all_vertices = np.vstack(vertices)
    flat = np.array(tris, dtype=np.int64).ravel()
    parent_arr = np.array(parent, dtype=np.int64)
    tri_mesh = build_polymesh(
        all_vertices,
        np.arange(0, flat.shape[0] + 1, 3),
        flat,
        mesh.tags[parent_arr],
        grid=mesh.grid,
        background=None if mesh.background is None else mesh.background[parent_arr],
    )
    logger.debug("Triangulated {} cells into {} triangles", mesh.n_cells, tri_mesh.n_cells)
    return TriMesh(mesh=tri_mesh, parent=parent_arr)


# =============================================================================
# NOYAUX DE WHITNEY
# =============================================================================

def barycentric_gradients(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """∇λ_i (T, 3, 2) et aires (T,) pour des triangles CCW (T, 3, 2)."""
    p0, p1, p2 = coords[:, 0], coords[:, 1], coords[:, 2]
    area = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
    opposite = np.stack([p2 - p1, p0 - p2, p1 - p0], axis=1)
    grads = np.stack([-opposite[..., 1], opposite[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return grads, area


def whitney_matrices(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Matrices locales (orientation locale) curl-curl (α = 1) et masse (β = 1).

    Returns:
        K (T, 3, 3), M (T, 3, 3)
    """
    grads, area = barycentric_gradients(coords)
    gram = np.einsum("tik,tjk->tij", grads, grads)
    lam = (np.ones((3, 3)) + np.eye(3)) / 12.0
    a, b = _LOCAL[:, 0], _LOCAL[:, 1]
    M = (
        lam[a][:, a][None] * gram[:, b][:, :, b]
        - lam[a][:, b][None] * gram[:, b][:, :, a]
        - lam[b][:, a][None] * gram[:, a][:, :, b]
        + lam[b][:, b][None] * gram[:, a][:, :, a]
    ) * area[:, None, None]
    K = np.ones((coords.shape[0], 3, 3)) / area[:, None, None]
    return K, M


def _triangle_data(tri: TriMesh):
    mesh = tri.mesh
    group = mesh.groups[3]
    coords = mesh.vertices[group.vertices]
    return group, coords


def _barycentric(coords: np.ndarray, points: np.ndarray) -> np.ndarray:
    """λ (N, 3) des points dans leurs triangles (coords (N, 3, 2))."""
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    d = points - coords[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    l1 = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
    l2 = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def _basis_at(coords: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Valeurs des trois fonctions de Whitney (orientation locale), (N, 3, 2)."""
    grads, _ = barycentric_gradients(coords)
    lam = _barycentric(coords, points)
    a, b = _LOCAL[:, 0], _LOCAL[:, 1]
    return lam[:, a, None] * grads[:, b] - lam[:, b, None] * grads[:, a]


# =============================================================================
# RÉSOLUTION
# =============================================================================

def nd0_solve(
    tri: TriMesh,
    coeffs: CoefficientField,
    f: Optional[VectorField],
    g: Optional[VectorField] = None,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
    adaptive: bool = False,
) -> Nd0Solution:
    """(α rot u, rot v) - (β u, v) = (f, v), trace tangentielle imposée au bord."""
    mesh = tri.mesh
    group, coords = _triangle_data(tri)
    K, M = whitney_matrices(coords)
    sg = group.signs.astype(float)
    signed = sg[:, :, None] * sg[:, None, :]
    alpha = coeffs.alpha(mesh.tags[group.cells])
    beta = coeffs.beta(mesh.tags[group.cells])
    local = (alpha[:, None, None] * K - beta[:, None, None] * M) * signed
    A = scatter(mesh.n_edges, [(group.edges, local)])

    rhs = np.zeros(mesh.n_edges, dtype=complex)
    if f is not None:
        tags = mesh.tags

        def sampled(points: np.ndarray, owner: np.ndarray) -> np.ndarray:
            return f(points, tags[owner])

        pts, w, owner = mesh_quadrature(
            mesh, quad_order, singular=singular, sharp=sampled if adaptive else None
        )
        # groups[3] couvre toutes les cellules, dans l'ordre
        phi = _basis_at(coords[owner], pts)
        vals = np.asarray(sampled(pts, owner), dtype=complex)
        proj = np.einsum("nkd,nd->nk", phi, vals)
        cell_rhs = integrate_cells(mesh, proj, w, owner) * sg
        np.add.at(rhs, group.edges, cell_rhs)

    sys = LinearSystem(A=A, b=rhs, free=np.arange(mesh.n_edges), n_total=mesh.n_edges)
    sys = set_tangential_bc(sys, mesh, g, quad_order, singular)
    report = solve(sys)
    return Nd0Solution(dofs=report.dofs, report=report)


# =============================================================================
# POST-TRAITEMENT
# =============================================================================

def nd0_cell_means(tri: TriMesh, dofs: np.ndarray) -> np.ndarray:
    """Moyenne de u_h sur chaque triangle: mean φ_k = (∇λ_b - ∇λ_a)/3."""
    group, coords = _triangle_data(tri)
    grads, _ = barycentric_gradients(coords)
    mean_phi = (grads[:, _LOCAL[:, 1]] - grads[:, _LOCAL[:, 0]]) / 3.0
    local = dofs[group.edges] * group.signs
    return np.einsum("tk,tkd->td", local, mean_phi)


def parent_means(tri: TriMesh, means: np.ndarray, n_parents: int) -> np.ndarray:
    """Moyennes par triangle agrégées sur les cellules polygonales d'origine."""
    area = tri.mesh.metrics.area
    out = np.zeros((n_parents, 2), dtype=complex)
    np.add.at(out, tri.parent, means * area[:, None])
    total = np.bincount(tri.parent, weights=area, minlength=n_parents)
    return out / total[:, None]


def nd0_errors(
    tri: TriMesh,
    dofs: np.ndarray,
    u_exact: VectorField,
    rot_exact: VectorField,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
) -> ErrorReport:
    """‖u - u_h‖₀ (évaluation ponctuelle de ND0) et ‖rot u - rot u_h‖₀."""
    mesh = tri.mesh
    group, coords = _triangle_data(tri)
    pts, w, owner = mesh_quadrature(mesh, quad_order, singular=singular)
    phi = _basis_at(coords[owner], pts)
    local = (dofs[group.edges] * group.signs)[owner]
    u_h = np.einsum("nk,nkd->nd", local, phi)
    rot_h = (dofs[group.edges] * group.signs).sum(axis=1) / mesh.metrics.area
    tags = mesh.tags[owner]
    du = np.asarray(u_exact(pts, tags), dtype=complex) - u_h
    dr = np.asarray(rot_exact(pts, tags), dtype=complex) - rot_h[owner]
    return ErrorReport(
        l2_proj_error=float(np.sqrt(np.dot(w, np.sum(np.abs(du) ** 2, axis=1)))),
        rot_error=float(np.sqrt(np.dot(w, np.abs(dr) ** 2))),
    )
