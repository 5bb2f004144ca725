"""
Service géométrique: évaluation des level sets, découpe de polygones,
métriques de forme et triangulation.

Toutes les fonctions sont pures (entrées immuables, aucun état partagé).
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial.distance import pdist

from app.core.config import DEGENERATE_AREA_RATIO, SNAP_TOL
from app.core.exceptions import GeometryError, TangentCutError
from app.models.geometry import (
    Circle,
    InterfaceSpec,
    Line,
    Point2,
    Polygon,
    PolygonMetrics,
    Primitive,
    Region,
    signed_area,
)

# Résolution de la recherche du rayon d'étoilement
STAR_GRID = 65
STAR_REFINEMENTS = 4


# =============================================================================
# LEVEL SETS
# =============================================================================

def level_eval(spec: InterfaceSpec, p: Point2) -> Tuple[np.ndarray, Region]:
    """Valeurs signées de chaque primitive en p et étiquette de région."""
    xy = np.array([p[0], p[1]], dtype=float)
    values = spec.values(xy)
    tag = Region(int(spec.region(xy)))
    return values, tag


# =============================================================================
# DÉCOUPE
# =============================================================================

def _canonical_crossing(prim: Primitive, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Point d'intersection sur le segment [a, b], calculé dans l'ordre
    lexicographique des extrémités pour que deux cellules voisines obtiennent
    exactement les mêmes flottants.
    """
    swap = (a[0], a[1]) > (b[0], b[1])
    p0, p1 = (b, a) if swap else (a, b)
    va, vb = float(prim.value(p0)), float(prim.value(p1))
    roots = prim.crossings(p0, p1)
    if roots.size == 0:
        # Changement de signe sans racine exploitable: interpolation linéaire
        t = va / (va - vb)
    elif roots.size == 1:
        t = float(roots[0])
    else:
        # Deux racines: garder celle qui sépare les signes des extrémités
        mids = [abs(r - 0.5) for r in roots]
        t = float(roots[int(np.argmin(mids))])
    return prim.point_at(p0.copy(), p1.copy(), t)


def _check_same_edge_crossing(prim: Primitive, a: np.ndarray, b: np.ndarray, tol: float) -> None:
    """Un cercle qui entre et ressort par la même arête est rejeté."""
    if not isinstance(prim, Circle):
        return
    c = np.asarray(prim.center, dtype=float)
    d = b - a
    t = np.clip(float((c - a) @ d) / float(d @ d), 0.0, 1.0)
    depth = float(np.hypot(*(a + t * d - c))) - prim.radius
    if depth < -tol and 0.0 < t < 1.0:
        raise TangentCutError(
            "Interface enters and exits the cell through the same edge"
        )


def cut_polygon(
    poly: Polygon,
    primitive: Primitive,
    snap_tol: float = SNAP_TOL,
) -> List[Tuple[Polygon, int]]:
    """
    Découpe un polygone par une primitive (droite ou corde de cercle).

    Returns:
        Liste de (polygone, côté) avec côté = -1 (négatif) ou +1 (positif).
        Un polygone entièrement d'un côté est renvoyé tel quel.
    """
    v = poly.vertices
    n = v.shape[0]
    h = float(pdist(v).max())
    tol = snap_tol * h

    vals = primitive.value(v)
    sgn = np.sign(vals).astype(int)
    sgn[np.abs(vals) <= tol] = 0

    for i in range(n):
        j = (i + 1) % n
        if sgn[i] > 0 and sgn[j] > 0:
            _check_same_edge_crossing(primitive, v[i], v[j], tol)

    if not np.any(sgn < 0):
        return [(poly, 1)]
    if not np.any(sgn > 0):
        return [(poly, -1)]

    # Points d'intersection (avec accrochage aux sommets existants)
    inserted = {}
    for i in range(n):
        j = (i + 1) % n
        if sgn[i] * sgn[j] >= 0:
            continue
        p = _canonical_crossing(primitive, v[i], v[j])
        if np.hypot(*(p - v[i])) <= tol:
            sgn[i] = 0
        elif np.hypot(*(p - v[j])) <= tol:
            sgn[j] = 0
        else:
            inserted[i] = p

    pts: List[np.ndarray] = []
    sg: List[int] = []
    for i in range(n):
        pts.append(v[i])
        sg.append(int(sgn[i]))
        if i in inserted:
            pts.append(inserted[i])
            sg.append(0)

    m = len(pts)
    nz = [k for k in range(m) if sg[k] != 0]
    changes = sum(1 for a, b in zip(nz, nz[1:] + nz[:1]) if sg[a] != sg[b])
    if changes != 2:
        raise TangentCutError(
            f"Interface crosses the cell boundary {changes} times (expected 2)"
        )

    def collect(side: int) -> List[int]:
        prev_nz = {nz[k]: nz[k - 1] for k in range(len(nz))}
        j0 = next(k for k in nz if sg[k] == side and sg[prev_nz[k]] == -side)
        start = j0
        while sg[(start - 1) % m] == 0:
            start = (start - 1) % m
        out = []
        k = start
        while True:
            out.append(k)
            k = (k + 1) % m
            if sg[k] == -side:
                break
        return out

    parent_area = poly.area
    children: List[Tuple[Polygon, int]] = []
    for side in (-1, 1):
        loop = np.array([pts[k] for k in collect(side)])
        if loop.shape[0] < 3 or signed_area(loop) < DEGENERATE_AREA_RATIO * parent_area:
            logger.warning(
                "Dropping degenerate cut polygon (side={}, n={}, parent_area={:.3e})",
                side, loop.shape[0], parent_area,
            )
            continue
        children.append((Polygon(loop), side))
    return children


def cut_by_interface(
    poly: Polygon,
    spec: InterfaceSpec,
    snap_tol: float = SNAP_TOL,
    primitives: Optional[Sequence[int]] = None,
) -> List[Tuple[Polygon, Region]]:
    """
    Découpe séquentielle par chaque primitive, puis étiquetage au centroïde.
    """
    pieces = [poly]
    indices = range(len(spec.primitives)) if primitives is None else primitives
    for idx in indices:
        prim = spec.primitives[idx]
        nxt = []
        for piece in pieces:
            nxt.extend(child for child, _ in cut_polygon(piece, prim, snap_tol))
        pieces = nxt
    out = []
    for piece in pieces:
        tag = Region(int(spec.region(polygon_centroid(piece.vertices))))
        out.append((piece, tag))
    return out


# =============================================================================
# MÉTRIQUES
# =============================================================================

def polygon_centroid(v: np.ndarray) -> np.ndarray:
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _inner_distances(points: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Distances signées (positives à l'intérieur) aux droites support des arêtes."""
    a = v
    b = np.roll(v, -1, axis=0)
    t = b - a
    t = t / np.hypot(t[:, 0], t[:, 1])[:, None]
    n_in = np.stack([-t[:, 1], t[:, 0]], axis=1)
    rel = points[:, None, :] - a[None, :, :]
    return np.einsum("mnk,nk->mn", rel, n_in)


def star_radius(v: np.ndarray, centroid: Optional[np.ndarray] = None) -> float:
    """
    Rayon de la plus grande boule par rapport à laquelle le polygone est étoilé.

    Une boule convient si elle est incluse dans le noyau (intersection des
    demi-plans intérieurs des arêtes). Recherche sur grille de candidats
    (par axe, sur la boîte englobante) amorcée au centroïde, puis raffinée
    autour du meilleur candidat.
    """
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    if centroid is None:
        centroid = polygon_centroid(v)

    gx = np.linspace(lo[0], hi[0], STAR_GRID)
    gy = np.linspace(lo[1], hi[1], STAR_GRID)
    X, Y = np.meshgrid(gx, gy)
    cand = np.vstack([np.column_stack([X.ravel(), Y.ravel()]), centroid[None, :]])
    score = _inner_distances(cand, v).min(axis=1)
    best = int(np.argmax(score))
    best_pt, best_val = cand[best], float(score[best])
    step = (hi - lo) / (STAR_GRID - 1)

    for _ in range(STAR_REFINEMENTS):
        gx = np.linspace(best_pt[0] - step[0], best_pt[0] + step[0], STAR_GRID)
        gy = np.linspace(best_pt[1] - step[1], best_pt[1] + step[1], STAR_GRID)
        X, Y = np.meshgrid(gx, gy)
        cand = np.column_stack([X.ravel(), Y.ravel()])
        score = _inner_distances(cand, v).min(axis=1)
        k = int(np.argmax(score))
        if score[k] > best_val:
            best_pt, best_val = cand[k], float(score[k])
        step = 2.0 * step / (STAR_GRID - 1)

    return max(best_val, 0.0)


def polygon_metrics(poly: Polygon) -> PolygonMetrics:
    """Aire, diamètre, centroïde, rayon d'étoilement, h_e et l_e."""
    v = poly.vertices
    area = poly.area
    centroid = polygon_centroid(v)
    a, b = poly.edges()
    edge_vec = b - a
    edge_lengths = np.hypot(edge_vec[:, 0], edge_vec[:, 1])
    # l_e = max sur les sommets de la distance à la droite support de e
    heights = np.abs(_inner_distances(v, v)).max(axis=0)
    return PolygonMetrics(
        area=area,
        diameter=float(pdist(v).max()),
        centroid=centroid,
        star_radius=star_radius(v, centroid),
        edge_lengths=edge_lengths,
        supporting_heights=heights,
        first_moments=area * centroid,
    )


# =============================================================================
# TRIANGULATION
# =============================================================================

def _ear_clip(v: np.ndarray) -> List[np.ndarray]:
    idx = list(range(v.shape[0]))
    triangles = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        m = len(idx)
        clipped = False
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            p0, p1, p2 = v[i0], v[i1], v[i2]
            if cross(p0, p1, p2) <= 0.0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                q = v[j]
                if cross(p0, p1, q) >= 0 and cross(p1, p2, q) >= 0 and cross(p2, p0, q) >= 0:
                    inside = True
                    break
            if inside:
                continue
            triangles.append(np.array([p0, p1, p2]))
            del idx[k]
            clipped = True
            break
        guard += 1
        if not clipped or guard > 10 * v.shape[0]:
            raise GeometryError("Ear clipping found no ear (polygon not simple?)")
    triangles.append(v[idx])
    return triangles


def centroid_in_kernel(v: np.ndarray, centroid: Optional[np.ndarray] = None) -> bool:
    if centroid is None:
        centroid = polygon_centroid(v)
    scale = float(np.ptp(v, axis=0).max())
    return bool(_inner_distances(centroid[None, :], v).min() > 1e-12 * scale)


def triangulate(poly: Polygon) -> List[np.ndarray]:
    """
    Partition exacte en triangles: éventail depuis le centroïde si le polygone
    est étoilé par rapport à lui, ear clipping sinon.
    """
    v = poly.vertices
    centroid = polygon_centroid(v)
    if centroid_in_kernel(v, centroid):
        nxt = np.roll(v, -1, axis=0)
        return [np.array([centroid, v[i], nxt[i]]) for i in range(v.shape[0])]
    return _ear_clip(v)


def is_convex(v: np.ndarray) -> bool:
    a = np.roll(v, 1, axis=0)
    c = np.roll(v, -1, axis=0)
    cross = (v[:, 0] - a[:, 0]) * (c[:, 1] - v[:, 1]) - (v[:, 1] - a[:, 1]) * (c[:, 0] - v[:, 0])
    return bool(np.all(cross >= 0.0))


# =============================================================================
# LOCALISATION
# =============================================================================

def points_in_polygon(points: np.ndarray, v: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """
    Test d'appartenance vectorisé (nombre de croisements); les points à moins
    de `tol` du bord sont considérés intérieurs.
    """
    points = np.atleast_2d(points)
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(points.shape[0], dtype=bool)
    near = np.zeros(points.shape[0], dtype=bool)
    n = v.shape[0]
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        straddle = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= straddle & (x < xint)
        if tol > 0.0:
            dx, dy = bx - ax, by - ay
            ll = dx * dx + dy * dy
            t = np.clip(((x - ax) * dx + (y - ay) * dy) / ll, 0.0, 1.0)
            near |= np.hypot(ax + t * dx - x, ay + t * dy - y) <= tol
    return inside | near


def make_rectangle(x0: float, x1: float, y0: float, y1: float) -> Polygon:
    return Polygon(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


__all__ = [
    "Circle",
    "Line",
    "level_eval",
    "cut_polygon",
    "cut_by_interface",
    "polygon_metrics",
    "polygon_centroid",
    "star_radius",
    "triangulate",
    "is_convex",
    "points_in_polygon",
    "make_rectangle",
]
