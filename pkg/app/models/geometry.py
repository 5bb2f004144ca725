"""
Types géométriques: points, primitives d'interface, polygones.

Convention de signe des primitives:
- Circle: distance signée |p - c| - r (négative à l'intérieur)
- Line: (p - point) · normal (négative du côté opposé à la normale)
"""
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import GeometryError, InvalidPolygonError


class Point2(NamedTuple):
    x: float
    y: float


class Region(IntEnum):
    """Étiquette de région: Ω+ ou Ω-."""
    PLUS = 1
    MINUS = -1


@dataclass(frozen=True)
class Line:
    """Droite donnée par un point et une normale unitaire."""
    point: Tuple[float, float]
    normal: Tuple[float, float]

    def __post_init__(self):
        if not np.all(np.isfinite(self.point)) or not np.all(np.isfinite(self.normal)):
            raise GeometryError("Line with non-finite data")
        norm = float(np.hypot(*self.normal))
        if abs(norm - 1.0) > 1e-12:
            raise GeometryError(f"Line normal must be unit (|n|={norm!r})")

    def value(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return (p[..., 0] - self.point[0]) * self.normal[0] + (p[..., 1] - self.point[1]) * self.normal[1]

    def crossings(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Paramètres t ∈ [0, 1] des intersections du segment a→b avec la droite."""
        va, vb = float(self.value(a)), float(self.value(b))
        if va == vb:
            return np.empty(0)
        t = va / (va - vb)
        if not 0.0 <= t <= 1.0:
            return np.empty(0)
        return np.array([t])

    def point_at(self, a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
        p = a + t * (b - a)
        # Droites alignées sur les axes: coordonnée exacte
        if self.normal[1] == 0.0:
            p[0] = self.point[0]
        elif self.normal[0] == 0.0:
            p[1] = self.point[1]
        return p

    def shifted(self, offset: float) -> "Line":
        """Droite parallèle décalée de `offset` le long de la normale."""
        return Line(
            point=(self.point[0] + offset * self.normal[0], self.point[1] + offset * self.normal[1]),
            normal=self.normal,
        )


@dataclass(frozen=True)
class Circle:
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.center)) or not np.isfinite(self.radius):
            raise GeometryError("Circle with non-finite data")
        if self.radius <= 0:
            raise GeometryError(f"Circle radius must be > 0 (r={self.radius!r})")

    def value(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1]) - self.radius

    def crossings(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Racines de |a + t(b-a) - c| = r dans [0, 1], triées."""
        c = np.asarray(self.center, dtype=float)
        d = b - a
        f = a - c
        qa = float(d @ d)
        qb = 2.0 * float(f @ d)
        qc = float(f @ f) - self.radius ** 2
        disc = qb * qb - 4.0 * qa * qc
        if qa == 0.0 or disc < 0.0:
            return np.empty(0)
        sq = np.sqrt(disc)
        # Forme stable des racines
        q = -0.5 * (qb + np.copysign(sq, qb))
        roots = [q / qa]
        if q != 0.0:
            roots.append(qc / q)
        roots = np.unique(np.array(roots))
        return roots[(roots >= 0.0) & (roots <= 1.0)]

    def point_at(self, a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
        return a + t * (b - a)


Primitive = Union[Line, Circle]


@dataclass(frozen=True)
class InterfaceSpec:
    """
    Interface composite: primitives signées + règle de région.

    La règle est une forme normale disjonctive: la région est MINUS si, pour
    au moins une clause, toutes les primitives de la clause sont négatives.
    """
    primitives: Tuple[Primitive, ...]
    minus_clauses: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.primitives) == 0:
            raise GeometryError("InterfaceSpec needs at least one primitive")
        for clause in self.minus_clauses:
            if not clause:
                raise GeometryError("Empty region clause")
            for idx in clause:
                if not 0 <= idx < len(self.primitives):
                    raise GeometryError(f"Region clause references unknown primitive {idx}")

    def values(self, p: np.ndarray) -> np.ndarray:
        """Valeurs signées, shape (..., n_primitives)."""
        return np.stack([prim.value(p) for prim in self.primitives], axis=-1)

    def region(self, p: np.ndarray) -> np.ndarray:
        """Étiquettes (+1 / -1) vectorisées."""
        vals = self.values(p)
        minus = np.zeros(vals.shape[:-1], dtype=bool)
        for clause in self.minus_clauses:
            minus |= np.all(vals[..., list(clause)] < 0.0, axis=-1)
        return np.where(minus, int(Region.MINUS), int(Region.PLUS)).astype(np.int8)


@dataclass(frozen=True, eq=False)
class Polygon:
    """Polygone simple, sommets dans le sens trigonométrique."""
    vertices: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidPolygonError(f"Polygon needs at least 3 vertices, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidPolygonError("Polygon with non-finite vertex")
        if signed_area(v) <= 0.0:
            raise InvalidPolygonError("Polygon must be counter-clockwise with positive area")
        step = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(step[:, 0], step[:, 1]) == 0.0):
            raise InvalidPolygonError("Polygon has repeated consecutive vertices")
        if not is_simple(v):
            raise InvalidPolygonError("Polygon is self-intersecting")

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def edges(self) -> Tuple[np.ndarray, np.ndarray]:
        """Extrémités (a, b) de chaque arête, sens trigonométrique."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)


@dataclass(frozen=True, eq=False)
class PolygonMetrics:
    area: float
    diameter: float
    centroid: np.ndarray
    star_radius: float
    edge_lengths: np.ndarray
    supporting_heights: np.ndarray
    first_moments: Optional[np.ndarray] = field(default=None)


def signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return False


def is_simple(v: np.ndarray) -> bool:
    """Test O(n²) des intersections entre arêtes non adjacentes."""
    n = v.shape[0]
    if n == 3:
        return True
    for i in range(n):
        a1, a2 = v[i], v[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(a1, a2, v[j], v[(j + 1) % n]):
                return False
    return True
