"""
Service maillage: découpe d'une grille cartésienne par l'interface et
construction du complexe polygonal orienté (arêtes, orientations, bords).

Numérotation déterministe:
- sommets: ordre lexicographique (x, puis y)
- arêtes: paires (a < b) triées lexicographiquement
- cellules: ordre des cellules de fond (ligne par ligne), puis ordre de découpe
"""
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from app.core.config import DEDUP_TOL, GRADED_ORDER, GRADING_LEVELS, GRADING_RATIO, MAX_ADAPT_DEPTH, QUAD_ORDER, SNAP_TOL
from app.core.exceptions import MeshTopologyError, TangentCutError
from app.models.geometry import Circle, InterfaceSpec, Line, Polygon, Region
from app.models.mesh import CellMetrics, DofMap, GridSpec, PolyMesh
from app.services.geometry_service import (
    cut_by_interface,
    cut_polygon,
    make_rectangle,
    star_radius,
    triangulate,
)
from app.utils.quadrature import adaptive_triangle_points, triangle_points
from app.utils.vtk import write_polygon_vtk


# =============================================================================
# CONSTRUCTION GÉNÉRIQUE
# =============================================================================

def _group_metrics(coords: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Métriques vectorisées pour un lot de polygones à n sommets (m, n, 2)."""
    x, y = coords[..., 0], coords[..., 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum(axis=1)
    cx = ((x + xn) * cross).sum(axis=1) / (6.0 * area)
    cy = ((y + yn) * cross).sum(axis=1) / (6.0 * area)

    ev = np.stack([xn - x, yn - y], axis=-1)
    elen = np.hypot(ev[..., 0], ev[..., 1])
    t = ev / elen[..., None]
    n_in = np.stack([-t[..., 1], t[..., 0]], axis=-1)
    rel = coords[:, :, None, :] - coords[:, None, :, :]          # (m, point, edge, 2)
    dist = np.einsum("mpek,mek->mpe", rel, n_in)
    heights = np.abs(dist).max(axis=1)

    diff = coords[:, :, None, :] - coords[:, None, :, :]
    diam = np.hypot(diff[..., 0], diff[..., 1]).reshape(coords.shape[0], -1).max(axis=1)

    # Rectangles alignés: rayon d'étoilement exact
    axis_aligned = np.all((np.abs(ev[..., 0]) == 0.0) | (np.abs(ev[..., 1]) == 0.0), axis=1)
    rect = axis_aligned & (coords.shape[1] == 4)
    w = np.ptp(x, axis=1)
    hgt = np.ptp(y, axis=1)
    rho = np.where(rect, 0.5 * np.minimum(w, hgt), np.nan)
    return area, np.column_stack([cx, cy]), elen, heights, diam, rho


def build_polymesh(
    vertices: np.ndarray,
    cell_ptr: np.ndarray,
    cell_vertices: np.ndarray,
    tags: np.ndarray,
    grid: Optional[GridSpec] = None,
    background: Optional[np.ndarray] = None,
) -> PolyMesh:
    """
    Construit arêtes, orientations, masques de bord/interface et métriques
    à partir des boucles de sommets (CCW) des cellules.
    """
    n_cells = cell_ptr.shape[0] - 1
    sizes = np.diff(cell_ptr)
    cell_of = np.repeat(np.arange(n_cells), sizes)
    pos = np.arange(cell_vertices.shape[0]) - cell_ptr[cell_of]
    nxt = cell_vertices[cell_ptr[cell_of] + (pos + 1) % sizes[cell_of]]

    a = np.minimum(cell_vertices, nxt)
    b = np.maximum(cell_vertices, nxt)
    if np.any(a == b):
        raise MeshTopologyError("Zero-length edge in a cell loop")
    edges, inverse, counts = np.unique(
        np.column_stack([a, b]), axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.ravel()
    signs = np.where(cell_vertices < nxt, 1, -1).astype(np.int8)

    if np.any(counts > 2):
        bad = int(np.flatnonzero(counts > 2)[0])
        raise MeshTopologyError("Edge shared by more than two cells", edge=bad)
    sign_sum = np.bincount(inverse, weights=signs, minlength=edges.shape[0])
    interior = counts == 2
    if np.any(sign_sum[interior] != 0):
        bad = int(np.flatnonzero(interior & (sign_sum != 0))[0])
        raise MeshTopologyError("Interior edge with matching orientations", edge=bad)
    boundary = counts == 1

    if grid is not None:
        p, q = vertices[edges[boundary, 0]], vertices[edges[boundary, 1]]
        tol = DEDUP_TOL * max(1.0, grid.x1 - grid.x0, grid.y1 - grid.y0)
        on_side = np.zeros(p.shape[0], dtype=bool)
        for coord, val in ((0, grid.x0), (0, grid.x1), (1, grid.y0), (1, grid.y1)):
            on_side |= (np.abs(p[:, coord] - val) <= tol) & (np.abs(q[:, coord] - val) <= tol)
        if not np.all(on_side):
            bad = int(np.flatnonzero(boundary)[np.flatnonzero(~on_side)[0]])
            raise MeshTopologyError("Non-conforming edge inside the domain (hanging vertex)", edge=bad)

    euler = vertices.shape[0] - edges.shape[0] + n_cells
    if euler != 1:
        raise MeshTopologyError(f"Euler relation V - E + C = {euler} (expected 1)")

    # Interface Γ_h: arêtes séparant deux cellules d'étiquettes différentes
    order = np.argsort(inverse, kind="stable")
    first = np.full(edges.shape[0], -1)
    second = np.full(edges.shape[0], -1)
    e_sorted = inverse[order]
    c_sorted = cell_of[order]
    starts = np.searchsorted(e_sorted, np.arange(edges.shape[0]))
    first[:] = c_sorted[starts]
    second[interior] = c_sorted[starts[interior] + 1]
    interface = np.zeros(edges.shape[0], dtype=bool)
    interface[interior] = tags[first[interior]] != tags[second[interior]]

    # Métriques par groupes de taille
    area = np.empty(n_cells)
    centroid = np.empty((n_cells, 2))
    diameter = np.empty(n_cells)
    rho = np.empty(n_cells)
    elen = np.empty(cell_vertices.shape[0])
    heights = np.empty(cell_vertices.shape[0])
    for n in np.unique(sizes):
        cells = np.flatnonzero(sizes == n)
        idx = cell_ptr[cells][:, None] + np.arange(n)[None, :]
        coords = vertices[cell_vertices[idx]]
        g_area, g_cent, g_len, g_h, g_diam, g_rho = _group_metrics(coords)
        if np.any(g_area <= 0.0):
            bad = int(cells[np.flatnonzero(g_area <= 0.0)[0]])
            raise MeshTopologyError("Cell with non-positive area (loop not CCW)", cell=bad)
        area[cells] = g_area
        centroid[cells] = g_cent
        diameter[cells] = g_diam
        elen[idx] = g_len
        heights[idx] = g_h
        for k in np.flatnonzero(np.isnan(g_rho)):
            g_rho[k] = star_radius(coords[k], g_cent[k])
        rho[cells] = g_rho

    metrics = CellMetrics(
        area=area,
        diameter=diameter,
        centroid=centroid,
        star_radius=rho,
        edge_lengths=elen,
        supporting_heights=heights,
    )
    return PolyMesh(
        vertices=vertices,
        edges=edges,
        cell_ptr=cell_ptr,
        cell_vertices=cell_vertices,
        cell_edges=inverse,
        cell_signs=signs,
        tags=np.asarray(tags, dtype=np.int8),
        boundary_edges=boundary,
        interface_edges=interface,
        metrics=metrics,
        grid=grid,
        background=background,
    )


# =============================================================================
# DÉCOUPE DE LA GRILLE
# =============================================================================

def _touched_cells(grid: GridSpec, spec: InterfaceSpec, snap_tol: float) -> np.ndarray:
    """Masque (n_primitives, ny, nx) des cellules de fond potentiellement coupées."""
    X, Y = np.meshgrid(grid.xs(), grid.ys())
    pts = np.stack([X, Y], axis=-1)
    tol = snap_tol * grid.h * np.sqrt(2.0)
    masks = []
    for prim in spec.primitives:
        vals = prim.value(pts)
        corners = np.stack([vals[:-1, :-1], vals[:-1, 1:], vals[1:, :-1], vals[1:, 1:]])
        lo, hi = corners.min(axis=0), corners.max(axis=0)
        touched = (lo < tol) & (hi > -tol)
        if isinstance(prim, Circle):
            cx, cy = prim.center
            xs, ys = grid.xs(), grid.ys()
            dx = np.maximum(np.maximum(xs[:-1] - cx, cx - xs[1:]), 0.0)
            dy = np.maximum(np.maximum(ys[:-1] - cy, cy - ys[1:]), 0.0)
            dbox = np.hypot(dy[:, None], dx[None, :])
            touched |= (dbox < prim.radius + tol) & (hi > -tol)
        masks.append(touched)
    return np.stack(masks)


def _merge_close_vertices(vertices: np.ndarray, flat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Fusionne les sommets à moins de DEDUP_TOL (composantes connexes des paires)."""
    tree = cKDTree(vertices)
    pairs = tree.query_pairs(DEDUP_TOL, output_type="ndarray")
    if pairs.shape[0] == 0:
        return vertices, flat
    n = vertices.shape[0]
    graph = coo_matrix((np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    rep = np.full(labels.max() + 1, n)
    np.minimum.at(rep, labels, np.arange(n))
    logger.debug("Merged {} near-duplicate vertices", pairs.shape[0])
    return vertices, rep[labels][flat]


def _drop_repeats(cell_ptr: np.ndarray, flat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Supprime les sommets consécutifs identiques apparus après fusion."""
    sizes = np.diff(cell_ptr)
    cell_of = np.repeat(np.arange(sizes.shape[0]), sizes)
    pos = np.arange(flat.shape[0]) - cell_ptr[cell_of]
    nxt = flat[cell_ptr[cell_of] + (pos + 1) % sizes[cell_of]]
    keep = flat != nxt
    if np.all(keep):
        return cell_ptr, flat
    new_sizes = np.bincount(cell_of[keep], minlength=sizes.shape[0])
    return np.concatenate([[0], np.cumsum(new_sizes)]), flat[keep]


def _insert_hanging_vertices(
    vertices: np.ndarray,
    cell_ptr: np.ndarray,
    flat: np.ndarray,
    grid: GridSpec,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Insère dans les boucles voisines les sommets qui tombent à l'intérieur
    d'une arête (extrémités de cordes): la cellule voisine gagne un sommet.
    """
    sizes = np.diff(cell_ptr)
    cell_of = np.repeat(np.arange(sizes.shape[0]), sizes)
    pos = np.arange(flat.shape[0]) - cell_ptr[cell_of]
    nxt = flat[cell_ptr[cell_of] + (pos + 1) % sizes[cell_of]]
    keys = np.column_stack([np.minimum(flat, nxt), np.maximum(flat, nxt)])
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    single = counts[inverse] == 1

    p, q = vertices[flat], vertices[nxt]
    tol = DEDUP_TOL * max(1.0, grid.x1 - grid.x0, grid.y1 - grid.y0)
    on_boundary = np.zeros(flat.shape[0], dtype=bool)
    for coord, val in ((0, grid.x0), (0, grid.x1), (1, grid.y0), (1, grid.y1)):
        on_boundary |= (np.abs(p[:, coord] - val) <= tol) & (np.abs(q[:, coord] - val) <= tol)
    suspects = np.flatnonzero(single & ~on_boundary)
    if suspects.size == 0:
        return cell_ptr, flat

    tree = cKDTree(vertices)
    extra: Dict[int, List[int]] = {}
    for k in suspects:
        a, b = vertices[flat[k]], vertices[nxt[k]]
        d = b - a
        ll = float(d @ d)
        found = tree.query_ball_point(0.5 * (a + b), 0.5 * np.sqrt(ll) + tol)
        hits = []
        for w in found:
            if w in (flat[k], nxt[k]):
                continue
            t = float((vertices[w] - a) @ d) / ll
            dist = np.hypot(*(a + t * d - vertices[w]))
            if 0.0 < t < 1.0 and dist <= tol:
                hits.append((t, w))
        if hits:
            extra[int(k)] = [w for _, w in sorted(hits)]

    if not extra:
        return cell_ptr, flat
    logger.debug("Inserted hanging vertices on {} cell edges", len(extra))
    new_flat: List[int] = []
    new_sizes = np.zeros(sizes.shape[0], dtype=int)
    for k in range(flat.shape[0]):
        new_flat.append(int(flat[k]))
        new_sizes[cell_of[k]] += 1
        for w in extra.get(k, ()):
            new_flat.append(w)
            new_sizes[cell_of[k]] += 1
    return np.concatenate([[0], np.cumsum(new_sizes)]), np.array(new_flat, dtype=np.int64)


def build_cut_mesh(
    grid: GridSpec,
    spec: Optional[InterfaceSpec],
    snap_tol: float = SNAP_TOL,
) -> PolyMesh:
    """
    Maillage adapté à l'interface: cellules cartésiennes non touchées + enfants
    des cellules coupées (cordes pour les cercles).

    Raises:
        TangentCutError: primitive tangente à une cellule (nommée), perturber n.
    """
    nx, ny = grid.nx, grid.ny
    xs, ys = grid.xs(), grid.ys()
    X, Y = np.meshgrid(xs, ys)
    grid_vertices = np.column_stack([X.ravel(), Y.ravel()])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    v00 = jj * (nx + 1) + ii
    squares = np.column_stack([v00, v00 + 1, v00 + nx + 2, v00 + nx + 1])

    if spec is None:
        touched = np.zeros((0, nx * ny), dtype=bool)
    else:
        touched = _touched_cells(grid, spec, snap_tol).reshape(len(spec.primitives), -1)
    any_touched = touched.any(axis=0) if touched.size else np.zeros(nx * ny, dtype=bool)

    # Cellules non touchées (vectorisé)
    plain = np.flatnonzero(~any_touched)
    centers = np.column_stack([xs[ii[plain]] + 0.5 * grid.hx, ys[jj[plain]] + 0.5 * grid.hy])
    if spec is None:
        plain_tags = np.full(plain.shape[0], int(Region.PLUS), dtype=np.int8)
    else:
        plain_tags = spec.region(centers)

    # Cellules coupées
    new_points: Dict[Tuple[float, float], int] = {}
    cut_bg: List[int] = []
    cut_child: List[int] = []
    cut_loops: List[np.ndarray] = []
    cut_tags: List[int] = []
    n_grid = grid_vertices.shape[0]
    for bg in np.flatnonzero(any_touched):
        i, j = int(ii[bg]), int(jj[bg])
        corner_ids = squares[bg]
        corner_map = {tuple(grid_vertices[v]): int(v) for v in corner_ids}
        poly = make_rectangle(xs[i], xs[i + 1], ys[j], ys[j + 1])
        prims = np.flatnonzero(touched[:, bg])
        try:
            pieces = cut_by_interface(poly, spec, snap_tol, primitives=prims)
        except TangentCutError as exc:
            raise TangentCutError(
                f"Interface tangent to background cell ({i}, {j}): {exc.args[0]}; "
                f"perturb the grid resolution n",
                cell=int(bg),
            ) from exc
        for child, (piece, tag) in enumerate(pieces):
            ids = []
            for pt in piece.vertices:
                key = (float(pt[0]), float(pt[1]))
                vid = corner_map.get(key)
                if vid is None:
                    vid = new_points.setdefault(key, n_grid + len(new_points))
                ids.append(vid)
            cut_bg.append(int(bg))
            cut_child.append(child)
            cut_loops.append(np.array(ids, dtype=np.int64))
            cut_tags.append(int(tag))

    extra = np.array(list(new_points.keys()), dtype=float).reshape(-1, 2)
    vertices = np.vstack([grid_vertices, extra])

    # Assemblage ordonné (cellule de fond, puis enfant)
    bg_all = np.concatenate([plain, np.array(cut_bg, dtype=np.int64)])
    child_all = np.concatenate([np.zeros(plain.shape[0], dtype=np.int64), np.array(cut_child, dtype=np.int64)])
    sizes_all = np.concatenate([np.full(plain.shape[0], 4), np.array([len(l) for l in cut_loops], dtype=np.int64)])
    flat_all = np.concatenate([squares[plain].ravel()] + cut_loops) if cut_loops else squares[plain].ravel()
    tags_all = np.concatenate([plain_tags, np.array(cut_tags, dtype=np.int8)])

    starts = np.concatenate([[0], np.cumsum(sizes_all)[:-1]])
    perm = np.lexsort((child_all, bg_all))
    new_sizes = sizes_all[perm]
    new_ptr = np.concatenate([[0], np.cumsum(new_sizes)])
    gather = np.repeat(starts[perm] - new_ptr[:-1], new_sizes) + np.arange(new_ptr[-1])
    flat = flat_all[gather]
    background = bg_all[perm]
    tags = tags_all[perm]

    vertices, flat = _merge_close_vertices(vertices, flat)
    cell_ptr, flat = _drop_repeats(new_ptr, flat)
    cell_ptr, flat = _insert_hanging_vertices(vertices, cell_ptr, flat, grid)

    # Renumérotation lexicographique des sommets utilisés
    used = np.unique(flat)
    sub = vertices[used]
    order = np.lexsort((sub[:, 1], sub[:, 0]))
    new_id = np.empty(vertices.shape[0], dtype=np.int64)
    new_id[used[order]] = np.arange(used.shape[0])
    vertices = sub[order]
    flat = new_id[flat]

    mesh = build_polymesh(vertices, cell_ptr, flat, tags, grid=grid, background=background)
    logger.debug(
        "Cut mesh built: {} cells ({} cut background cells), {} edges, {} vertices",
        mesh.n_cells, int(any_touched.sum()), mesh.n_edges, mesh.n_vertices,
    )
    return mesh


# =============================================================================
# DOFS ET DIAGNOSTICS
# =============================================================================

def dof_map(mesh: PolyMesh) -> DofMap:
    return DofMap(
        n_edge_dofs=mesh.n_edges,
        n_node_dofs=mesh.n_vertices,
        edge_boundary=mesh.boundary_edges.copy(),
        node_boundary=mesh.boundary_vertices.copy(),
    )


def interface_mismatch(mesh: PolyMesh, spec: InterfaceSpec, samples: int = 9) -> Tuple[float, float]:
    """
    Distance max entre les cordes de Γ_h et l'interface exacte, et son
    rapport à h² (constante ε de la bande Ω^Γ_{εh²}).
    """
    edges = mesh.edges[mesh.interface_edges]
    if edges.shape[0] == 0:
        return 0.0, 0.0
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    t = np.linspace(0.0, 1.0, samples)
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    dist = np.abs(spec.values(pts)).min(axis=-1)
    worst = float(dist.max())
    h = mesh.grid.h if mesh.grid is not None else mesh.h_max
    return worst, worst / h ** 2


def euler_characteristic(mesh: PolyMesh) -> int:
    return mesh.n_vertices - mesh.n_edges + mesh.n_cells


def write_mesh_vtk(mesh: PolyMesh, path: str) -> None:
    """Export VTK legacy ASCII (polygones, étiquette de région en cell-data)."""
    loops = [mesh.cell_loop(c) for c in range(mesh.n_cells)]
    write_polygon_vtk(
        path,
        mesh.vertices,
        loops,
        cell_scalars={"region": mesh.tags.astype(float)},
        title="cut polygonal mesh",
    )


def single_cell_mesh(vertices: Sequence[Sequence[float]], tag: Region = Region.PLUS) -> PolyMesh:
    """Maillage d'une seule cellule (tests, oracles élémentaires)."""
    v = np.asarray(vertices, dtype=float)
    n = v.shape[0]
    return build_polymesh(
        v,
        np.array([0, n]),
        np.arange(n),
        np.array([int(tag)], dtype=np.int8),
    )


# =============================================================================
# QUADRATURE SUR LE MAILLAGE
# =============================================================================

ADAPT_CHUNK = 20000


def mesh_triangles(mesh: PolyMesh, cells: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Triangulation exacte des cellules: éventail depuis le centroïde quand il
    est dans le noyau (toujours le cas pour les cellules convexes), ear
    clipping sinon.

    Returns:
        tris (T, 3, 2), owner (T,)
    """
    selected = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
    wanted = np.zeros(mesh.n_cells, dtype=bool)
    wanted[selected] = True
    tris, owner = [], []
    for n, group in sorted(mesh.groups.items()):
        keep = wanted[group.cells]
        if not keep.any():
            continue
        cells_g = group.cells[keep]
        coords = mesh.vertices[group.vertices[keep]]
        centroid = mesh.metrics.centroid[cells_g]
        nxt = np.roll(coords, -1, axis=1)
        e = nxt - coords
        rel = centroid[:, None, :] - coords
        # côté intérieur: produit vectoriel > 0 pour chaque arête
        cross = e[..., 0] * rel[..., 1] - e[..., 1] * rel[..., 0]
        fan = np.all(cross > 1e-12 * mesh.metrics.diameter[cells_g, None] ** 2, axis=1)
        if fan.any():
            c = np.broadcast_to(centroid[fan, None, :], coords[fan].shape)
            tris.append(np.stack([c, coords[fan], nxt[fan]], axis=2).reshape(-1, 3, 2))
            owner.append(np.repeat(cells_g[fan], n))
        for k in np.flatnonzero(~fan):
            pieces = triangulate(Polygon(coords[k]))
            tris.append(np.array(pieces))
            owner.append(np.full(len(pieces), cells_g[k]))
    return np.concatenate(tris), np.concatenate(owner)


def _graded_cell_triangles(mesh: PolyMesh, cell: int, line: Line) -> List[np.ndarray]:
    """Découpe en bandes parallèles à `line`, resserrées géométriquement vers elle."""
    poly = mesh.cell_polygon(cell)
    vals = line.value(poly.vertices)
    side = 1.0 if vals.max() > -vals.min() else -1.0
    dmax = float(np.abs(vals).max())
    near_side = -int(side)
    pieces: List[Polygon] = []
    current = poly
    for k in range(1, GRADING_LEVELS + 1):
        offset = side * dmax * GRADING_RATIO ** k
        cut = cut_polygon(current, line.shifted(offset), snap_tol=0.0)
        if len(cut) == 1:
            continue
        for piece, s in cut:
            if s == near_side:
                current = piece
            else:
                pieces.append(piece)
    pieces.append(current)
    out: List[np.ndarray] = []
    for piece in pieces:
        out.extend(triangulate(piece))
    return out


def mesh_quadrature(
    mesh: PolyMesh,
    order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
    sharp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    max_depth: int = MAX_ADAPT_DEPTH,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Points, poids et cellule propriétaire d'une quadrature sur tout le maillage.

    singular: droite près de laquelle l'intégrande est singulier; les cellules
        situées à moins d'un diamètre sont subdivisées géométriquement vers elle.
    sharp: fonction (points, owner) dont les variations pilotent un
        raffinement adaptatif (source quasi linéique).
    """
    tris, owner = mesh_triangles(mesh)
    if singular is not None:
        tol = 1e-12 * max(1.0, mesh.h_max)
        vals = singular.value(mesh.vertices)[mesh.cell_vertices]
        cell_of = np.repeat(np.arange(mesh.n_cells), mesh.cell_sizes)
        lo = np.full(mesh.n_cells, np.inf)
        hi = np.full(mesh.n_cells, -np.inf)
        np.minimum.at(lo, cell_of, vals)
        np.maximum.at(hi, cell_of, vals)
        # cellules d'un seul côté, à moins d'un diamètre de la droite
        one_sided = (lo >= -tol) | (hi <= tol)
        near = one_sided & (np.minimum(np.abs(lo), np.abs(hi)) <= mesh.metrics.diameter)
        graded = np.flatnonzero(near)
        if graded.size:
            keep = ~near[owner]
            tris, owner = tris[keep], owner[keep]
            g_tris, g_owner = [], []
            for c in graded:
                pieces = _graded_cell_triangles(mesh, int(c), singular)
                g_tris.append(np.array(pieces))
                g_owner.append(np.full(len(pieces), c))
            g_tris = np.concatenate(g_tris)
            g_pts, g_w = triangle_points(g_tris, max(order, GRADED_ORDER))
            g_owner = np.repeat(np.concatenate(g_owner), g_pts.shape[1])
            logger.debug("Graded quadrature on {} cells near the singular line", graded.size)
            pts, w, o = mesh_quadrature_triangles(tris, owner, order, sharp, max_depth)
            return (
                np.concatenate([pts, g_pts.reshape(-1, 2)]),
                np.concatenate([w, g_w.ravel()]),
                np.concatenate([o, g_owner]),
            )

    return mesh_quadrature_triangles(tris, owner, order, sharp, max_depth)


def mesh_quadrature_triangles(
    tris: np.ndarray,
    owner: np.ndarray,
    order: int,
    sharp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    max_depth: int = MAX_ADAPT_DEPTH,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature fixe ou adaptative sur un lot de triangles (T, 3, 2)."""
    if sharp is None:
        pts, w = triangle_points(tris, order)
        q = pts.shape[1]
        return pts.reshape(-1, 2), w.ravel(), np.repeat(owner, q)

    out_p, out_w, out_o = [], [], []
    for start in range(0, tris.shape[0], ADAPT_CHUNK):
        sl = slice(start, start + ADAPT_CHUNK)
        p, w, o = adaptive_triangle_points(tris[sl], owner[sl], sharp, order, max_depth)
        out_p.append(p)
        out_w.append(w)
        out_o.append(o)
    pts, w, o = np.concatenate(out_p), np.concatenate(out_w), np.concatenate(out_o)
    logger.debug("Adaptive quadrature: {} points for {} triangles", pts.shape[0], tris.shape[0])
    return pts, w, o


def integrate_cells(
    mesh: PolyMesh,
    values: np.ndarray,
    weights: np.ndarray,
    owner: np.ndarray,
) -> np.ndarray:
    """Σ par cellule de w·values; values (N,) ou (N, k)."""
    values = np.asarray(values)
    if values.ndim == 2:
        return np.stack([integrate_cells(mesh, values[:, k], weights, owner) for k in range(values.shape[1])], axis=1)
    if np.iscomplexobj(values):
        re = np.bincount(owner, weights=weights * values.real, minlength=mesh.n_cells)
        im = np.bincount(owner, weights=weights * values.imag, minlength=mesh.n_cells)
        return re + 1j * im
    return np.bincount(owner, weights=weights * values, minlength=mesh.n_cells)
