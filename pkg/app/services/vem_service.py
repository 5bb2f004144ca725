"""
Service VEM: noyaux élémentaires H(rot) d'ordre le plus bas.

DoF d'arête: ∫_e v·t ds, t orienté selon l'orientation canonique de l'arête
(sommet de plus petit indice vers le plus grand). Dans une cellule, l'arête
locale k va du sommet k au sommet k+1; le signe σ_k (= cell_signs) vaut +1
si ce sens coïncide avec l'orientation canonique.

Les noyaux travaillent par lots de cellules ayant le même nombre d'arêtes.
"""
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.sparse import coo_matrix, csr_matrix

from app.core.config import QUAD_ORDER
from app.core.exceptions import QuadratureError
from app.models.geometry import Line
from app.models.mesh import CellGroup, PolyMesh
from app.models.vem import CoefficientField, ElementOperators, StabScale
from app.utils.quadrature import segment_points

# field(points (N, 2), tags (N,)) -> (N, 2) complexe
VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]


# =============================================================================
# INTERPOLATION
# =============================================================================

def _edges_near(mesh: PolyMesh, line: Line, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Arêtes d'un seul côté de la droite dont l'extrémité la plus proche est à
    moins d'une longueur d'arête: (gradées vers a, gradées vers b).
    """
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    va, vb = line.value(a), line.value(b)
    length = np.hypot(*(b - a).T)
    one_sided = (np.minimum(va, vb) >= -tol) | (np.maximum(va, vb) <= tol)
    near = one_sided & (np.minimum(np.abs(va), np.abs(vb)) <= length)
    return near & (np.abs(va) < np.abs(vb)), near & (np.abs(vb) < np.abs(va))


def interpolate_edge(
    field: VectorField,
    mesh: PolyMesh,
    order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
    edges: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    DoFs ∫_e field·t ds par Gauss composite.

    Les arêtes proches de la droite `singular` sont intégrées avec une
    subdivision géométrique vers leur extrémité la plus proche.

    Raises:
        QuadratureError: échantillon non fini (avec l'arête fautive).
    """
    idx = np.arange(mesh.n_edges) if edges is None else np.asarray(edges)
    out = np.zeros(idx.shape[0], dtype=complex)
    if idx.shape[0] == 0:
        return out
    a = mesh.vertices[mesh.edges[idx, 0]]
    b = mesh.vertices[mesh.edges[idx, 1]]
    tags = mesh.edge_tags[idx]

    modes = np.zeros(idx.shape[0], dtype=int)
    if singular is not None:
        tol = 1e-12 * max(1.0, mesh.h_max)
        at_a, at_b = _edges_near(mesh, singular, tol)
        modes[at_a[idx]] = -1
        modes[at_b[idx]] = 1

    for mode in (0, -1, 1):
        sel = np.flatnonzero(modes == mode)
        if sel.size == 0:
            continue
        t, w = segment_points(order, graded_toward=mode)
        d = b[sel] - a[sel]
        pts = a[sel, None, :] + t[None, :, None] * d[:, None, :]
        vals = np.asarray(
            field(pts.reshape(-1, 2), np.repeat(tags[sel], t.shape[0])), dtype=complex
        ).reshape(sel.size, t.shape[0], 2)
        if not np.all(np.isfinite(vals)):
            bad = int(sel[np.argwhere(~np.isfinite(vals))[0, 0]])
            raise QuadratureError("Non-finite field sample on edge", edge=int(idx[bad]))
        # v·t |e| = v·d
        tang = np.einsum("eqk,ek->eq", vals, d)
        out[sel] = tang @ w
    return out


# =============================================================================
# NOYAUX PAR LOTS
# =============================================================================

def _group_geometry(mesh: PolyMesh, group: CellGroup) -> Dict[str, np.ndarray]:
    """Géométrie locale: aire, centroïde, milieux, tangentes unitaires, longueurs."""
    m = mesh.metrics
    coords = mesh.vertices[group.vertices]
    nxt = np.roll(coords, -1, axis=1)
    vec = nxt - coords
    length = np.hypot(vec[..., 0], vec[..., 1])
    return {
        "area": m.area[group.cells],
        "centroid": m.centroid[group.cells],
        "diameter": m.diameter[group.cells],
        "mid": 0.5 * (coords + nxt),
        "tangent": vec / length[..., None],
        "length": length,
    }


def _local_projection(geo: Dict[str, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    P (m, 2, n) et r (m, n) en orientation locale.

    ∫_K v·c = ∫_K rot v p - ∮ (v·t) p avec vect-rot p = c (p = y, puis p = -x);
    la trace tangentielle étant constante par arête, les intégrales d'arêtes
    de p linéaire sont exactes au point milieu.
    """
    area = geo["area"]
    cx, cy = geo["centroid"][:, 0], geo["centroid"][:, 1]
    mx, my = geo["mid"][..., 0], geo["mid"][..., 1]
    P = np.stack([cy[:, None] - my, mx - cx[:, None]], axis=1) / area[:, None, None]
    r = np.broadcast_to(1.0 / area[:, None], mx.shape).copy()
    return P, r


def _local_stabilization(geo: Dict[str, np.ndarray], P: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """S = s Qᵀ diag(|e|) Q avec Q = diag(1/|e|) - T P (trace tangentielle de (I - Π_K)φ)."""
    length = geo["length"]
    n = length.shape[1]
    Q = np.eye(n)[None, :, :] / length[:, :, None] - np.einsum("mek,mkj->mej", geo["tangent"], P)
    return weight[:, None, None] * np.einsum("mei,me,mej->mij", Q, length, Q)


def _signed(mat: np.ndarray, signs: np.ndarray) -> np.ndarray:
    return mat * signs[:, :, None] * signs[:, None, :]


def stab_weights(mesh: PolyMesh, cells: np.ndarray, stab: StabScale) -> np.ndarray:
    if StabScale(stab) is StabScale.GLOBAL_H:
        return np.full(cells.shape[0], mesh.h_max)
    return mesh.metrics.diameter[cells]


def iter_group_operators(
    mesh: PolyMesh,
    coeffs: CoefficientField,
    stab: StabScale = StabScale.LOCAL_HK,
) -> Iterator[Tuple[CellGroup, Dict[str, np.ndarray]]]:
    """
    Opérateurs par groupe de cellules, en orientation globale:
    P (m, 2, n), r (m, n), A, M, S (m, n, n).
    """
    for n, group in sorted(mesh.groups.items()):
        geo = _group_geometry(mesh, group)
        P, r = _local_projection(geo)
        S = _local_stabilization(geo, P, stab_weights(mesh, group.cells, stab))
        sg = group.signs.astype(float)
        Pg = P * sg[:, None, :]
        rg = r * sg
        area = geo["area"]
        alpha = coeffs.alpha(mesh.tags[group.cells])
        beta = coeffs.beta(mesh.tags[group.cells])
        A = (alpha * area)[:, None, None] * rg[:, :, None] * rg[:, None, :]
        M = (beta * area)[:, None, None] * np.einsum("mki,mkj->mij", Pg, Pg)
        yield group, {"P": Pg, "r": rg, "A": A, "M": M, "S": _signed(S, sg)}


# =============================================================================
# API PAR CELLULE
# =============================================================================

def _cell_group(mesh: PolyMesh, cell: int) -> CellGroup:
    n = int(mesh.cell_sizes[cell])
    idx = mesh.cell_ptr[cell] + np.arange(n)
    return CellGroup(
        cells=np.array([cell]),
        vertices=mesh.cell_vertices[idx][None, :],
        edges=mesh.cell_edges[idx][None, :],
        signs=mesh.cell_signs[idx][None, :],
    )


def element_rot(mesh: PolyMesh, cell: int, local_dofs: np.ndarray) -> complex:
    """rot v_h = (1/|K|) Σ σ_e dof_e (formule de Stokes)."""
    idx = slice(mesh.cell_ptr[cell], mesh.cell_ptr[cell + 1])
    return complex(np.dot(mesh.cell_signs[idx], local_dofs) / mesh.metrics.area[cell])


def element_projection(mesh: PolyMesh, cell: int) -> np.ndarray:
    """Matrice P (2, n): DoFs (orientation globale) -> Π_K v_h."""
    group = _cell_group(mesh, cell)
    P, _ = _local_projection(_group_geometry(mesh, group))
    return P[0] * group.signs[0].astype(float)[None, :]


def element_matrices(
    mesh: PolyMesh,
    cell: int,
    coeffs: CoefficientField,
    stab: StabScale = StabScale.LOCAL_HK,
) -> ElementOperators:
    group = _cell_group(mesh, cell)
    geo = _group_geometry(mesh, group)
    P, r = _local_projection(geo)
    S = _local_stabilization(geo, P, stab_weights(mesh, group.cells, stab))
    sg = group.signs.astype(float)
    Pg, rg = P[0] * sg[0][None, :], r[0] * sg[0]
    area = float(geo["area"][0])
    alpha = float(coeffs.alpha(mesh.tags[cell]))
    beta = complex(coeffs.beta(mesh.tags[cell]))
    return ElementOperators(
        cell=cell,
        P=Pg,
        r=rg,
        A=alpha * area * np.outer(rg, rg),
        M=beta * area * (Pg.T @ Pg),
        S=_signed(S, sg)[0],
    )


# =============================================================================
# ASSEMBLAGE DES OPÉRATEURS GLOBAUX
# =============================================================================

def scatter(n: int, blocks) -> csr_matrix:
    """Somme des blocs élémentaires [(edges (m, k), values (m, k, k)), ...] en CSR."""
    rows, cols, vals = [], [], []
    for edges, values in blocks:
        k = edges.shape[1]
        rows.append(np.repeat(edges, k, axis=1).ravel())
        cols.append(np.tile(edges, (1, k)).ravel())
        vals.append(values.ravel())
    mat = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def global_matrices(
    mesh: PolyMesh,
    coeffs: CoefficientField,
    stab: StabScale = StabScale.LOCAL_HK,
) -> Dict[str, csr_matrix]:
    """A (rot-rot), B (= Σ M_K + S_K) sur les DoFs d'arête."""
    a_blocks, b_blocks = [], []
    for group, ops in iter_group_operators(mesh, coeffs, stab):
        a_blocks.append((group.edges, ops["A"].astype(complex)))
        b_blocks.append((group.edges, ops["M"] + ops["S"]))
    return {"A": scatter(mesh.n_edges, a_blocks), "B": scatter(mesh.n_edges, b_blocks)}


def global_b_matrix(
    mesh: PolyMesh,
    coeffs: CoefficientField,
    stab: StabScale = StabScale.LOCAL_HK,
) -> csr_matrix:
    return global_matrices(mesh, coeffs, stab)["B"]


def gradient_matrix(mesh: PolyMesh) -> csr_matrix:
    """Incidence arête-sommet G: (G q)_e = q(b) - q(a)."""
    E = mesh.n_edges
    rows = np.repeat(np.arange(E), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], E)
    return coo_matrix((vals, (rows, cols)), shape=(E, mesh.n_vertices)).tocsr()


# =============================================================================
# CHAMPS DISCRETS
# =============================================================================

def projected_field(mesh: PolyMesh, dofs: np.ndarray) -> np.ndarray:
    """Π_K u_h pour chaque cellule, (C, 2) complexe."""
    out = np.zeros((mesh.n_cells, 2), dtype=complex)
    for n, group in mesh.groups.items():
        P, _ = _local_projection(_group_geometry(mesh, group))
        local = dofs[group.edges] * group.signs
        out[group.cells] = np.einsum("mkn,mn->mk", P, local)
    return out


def cell_rot(mesh: PolyMesh, dofs: np.ndarray) -> np.ndarray:
    """rot u_h constant par cellule, (C,) complexe."""
    cell_of = np.repeat(np.arange(mesh.n_cells), mesh.cell_sizes)
    contrib = mesh.cell_signs * np.asarray(dofs)[mesh.cell_edges]
    total = np.zeros(mesh.n_cells, dtype=complex)
    np.add.at(total, cell_of, contrib)
    return total / mesh.metrics.area


def log_operator_sizes(mesh: PolyMesh) -> None:
    sizes = {n: int(g.cells.shape[0]) for n, g in sorted(mesh.groups.items())}
    logger.debug("Element groups by edge count: {}", sizes)
