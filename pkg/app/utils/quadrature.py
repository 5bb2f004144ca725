"""
Règles de quadrature: Gauss-Legendre sur [0, 1], règles coniques
(Gauss-Jacobi × Gauss-Legendre) sur le triangle, subdivision géométrique
vers une singularité et raffinement adaptatif par sous-triangles.
"""
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy.special import roots_jacobi

from app.core.config import GRADED_ORDER, GRADING_LEVELS, GRADING_RATIO, MAX_ADAPT_DEPTH
from app.core.exceptions import QuadratureError


@lru_cache(maxsize=32)
def gauss_01(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre sur [0, 1], exact pour les polynômes de degré `order`."""
    n = max(1, order // 2 + 1)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=32)
def triangle_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Règle sur le triangle de référence (0,0), (1,0), (0,1); poids de somme 1/2.

    Produit conique: x = u (Gauss-Jacobi, poids 1-u), y = (1-u) v (Gauss-Legendre).
    """
    n = max(1, order // 2 + 1)
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (xj + 1.0)
    wu = 0.25 * wj
    v, wv = gauss_01(2 * n - 1)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([U.ravel(), ((1.0 - U) * V).ravel()])
    return pts, W.ravel()


def triangle_points(tris: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Points et poids physiques pour un lot de triangles (T, 3, 2).

    Returns:
        points (T, q, 2), weights (T, q)
    """
    ref, w = triangle_rule(order)
    a = tris[:, 0, :]
    e1 = tris[:, 1, :] - a
    e2 = tris[:, 2, :] - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = a[:, None, :] + ref[None, :, 0, None] * e1[:, None, :] + ref[None, :, 1, None] * e2[:, None, :]
    weights = np.abs(det)[:, None] * w[None, :]
    return pts, weights


def _split4(tris: np.ndarray) -> np.ndarray:
    """Subdivision par les milieux: (T, 3, 2) -> (4T, 3, 2)."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    kids = np.stack([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ], axis=1)
    return kids.reshape(-1, 3, 2)


def _evaluate(fn: Callable, pts: np.ndarray, owner: np.ndarray) -> np.ndarray:
    vals = np.asarray(fn(pts, owner))
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals.reshape(pts.shape[0], -1)))[0, 0]
        raise QuadratureError("Non-finite source sample", location=tuple(pts[bad]))
    return vals.reshape(pts.shape[0], -1)


def adaptive_triangle_points(
    tris: np.ndarray,
    owner: np.ndarray,
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    order: int,
    max_depth: int = MAX_ADAPT_DEPTH,
    rtol: float = 1e-6,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Raffinement adaptatif piloté par la variation de `fn`.

    Un triangle est accepté quand la règle sur le triangle et la somme sur ses
    quatre fils diffèrent de moins de rtol·max|fn|·aire; sinon ses fils sont
    examinés à leur tour (profondeur max `max_depth`).

    Returns:
        points (N, 2), weights (N,), owner (N,)
    """
    q = triangle_rule(order)[0].shape[0]
    p0, _ = triangle_points(tris, order)
    scale = float(np.abs(_evaluate(fn, p0.reshape(-1, 2), np.repeat(owner, q))).max()) or 1.0

    out_p, out_w, out_o = [], [], []
    active, act_owner = tris, owner
    for depth in range(max_depth + 1):
        if active.shape[0] == 0:
            break
        pc, wc = triangle_points(active, order)
        fc = _evaluate(fn, pc.reshape(-1, 2), np.repeat(act_owner, q)).reshape(active.shape[0], q, -1)
        coarse = np.einsum("tq,tqc->tc", wc, fc)

        kids = _split4(active)
        pk, wk = triangle_points(kids, order)
        fk = _evaluate(fn, pk.reshape(-1, 2), np.repeat(np.repeat(act_owner, 4), q)).reshape(kids.shape[0], q, -1)
        fine = np.einsum("tq,tqc->tc", wk, fk).reshape(active.shape[0], 4, -1).sum(axis=1)

        area = wc.sum(axis=1)
        ok = np.abs(fine - coarse).max(axis=1) <= rtol * scale * area
        if depth == max_depth:
            ok[:] = True

        kid_owner = np.repeat(act_owner, 4)
        kid_ok = np.repeat(ok, 4)
        out_p.append(pk[kid_ok].reshape(-1, 2))
        out_w.append(wk[kid_ok].ravel())
        out_o.append(np.repeat(kid_owner[kid_ok], q))

        active = kids[~kid_ok]
        act_owner = kid_owner[~kid_ok]

    return np.concatenate(out_p), np.concatenate(out_w), np.concatenate(out_o)


def graded_breakpoints(ratio: float = GRADING_RATIO, levels: int = GRADING_LEVELS) -> np.ndarray:
    """Points de coupure [0, q^L, ..., q, 1] resserrés vers 0."""
    return np.concatenate([[0.0], ratio ** np.arange(levels, 0, -1, dtype=float), [1.0]])


def segment_points(
    order: int,
    graded_toward: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Points/poids paramétriques t ∈ [0, 1] sur un segment (poids sans la longueur).

    graded_toward: 0 (aucune subdivision), -1 (vers a), +1 (vers b).
    """
    if graded_toward == 0:
        return gauss_01(order)
    x, w = gauss_01(max(order, GRADED_ORDER))
    br = graded_breakpoints()
    lo, hi = br[:-1], br[1:]
    t = (lo[:, None] + (hi - lo)[:, None] * x[None, :]).ravel()
    wt = ((hi - lo)[:, None] * w[None, :]).ravel()
    if graded_toward > 0:
        t = 1.0 - t
    return t, wt
