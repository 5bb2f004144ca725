"""
Types du maillage polygonal: grille de fond, complexe de cellules, numérotation des DoFs.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from app.core.exceptions import ConfigError
from app.models.geometry import Polygon


@dataclass(frozen=True)
class GridSpec:
    """Grille cartésienne de fond sur (x0, x1) × (y0, y1)."""
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigError("Degenerate grid domain", field="domain")
        if self.nx < 2 or self.ny < 2:
            raise ConfigError(f"Grid needs n >= 2 per axis (nx={self.nx}, ny={self.ny})", field="n")

    @classmethod
    def from_h(cls, domain: Tuple[float, float, float, float], h: float) -> "GridSpec":
        x0, x1, y0, y1 = domain
        nx = int(round((x1 - x0) / h))
        ny = int(round((y1 - y0) / h))
        return cls(x0, x1, y0, y1, nx, ny)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def domain(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.x1, self.y0, self.y1)

    def xs(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx + 1)

    def ys(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny + 1)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Index de cellule de fond (j * nx + i) contenant chaque point."""
        i = np.clip(np.floor((points[:, 0] - self.x0) / self.hx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor((points[:, 1] - self.y0) / self.hy).astype(int), 0, self.ny - 1)
        return j * self.nx + i


@dataclass(frozen=True, eq=False)
class CellMetrics:
    """Métriques par cellule; edge_lengths / supporting_heights alignés sur cell_edges."""
    area: np.ndarray
    diameter: np.ndarray
    centroid: np.ndarray
    star_radius: np.ndarray
    edge_lengths: np.ndarray
    supporting_heights: np.ndarray


class CellGroup(NamedTuple):
    """Cellules ayant le même nombre d'arêtes, pour les noyaux vectorisés."""
    cells: np.ndarray      # (m,)
    vertices: np.ndarray   # (m, n) ids des sommets de la boucle
    edges: np.ndarray      # (m, n) ids des arêtes (arête k: sommet k -> k+1)
    signs: np.ndarray      # (m, n) +1 si l'orientation globale suit la boucle


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """
    Complexe polygonal orienté.

    Les boucles de cellules sont stockées à plat (format CSR): la cellule c
    occupe cell_vertices[cell_ptr[c]:cell_ptr[c+1]], l'arête locale k allant
    du sommet k au sommet k+1 (cycliquement).
    """
    vertices: np.ndarray
    edges: np.ndarray
    cell_ptr: np.ndarray
    cell_vertices: np.ndarray
    cell_edges: np.ndarray
    cell_signs: np.ndarray
    tags: np.ndarray
    boundary_edges: np.ndarray
    interface_edges: np.ndarray
    metrics: CellMetrics
    grid: Optional[GridSpec] = None
    background: Optional[np.ndarray] = None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cell_ptr.shape[0] - 1

    @property
    def h_max(self) -> float:
        return float(self.metrics.diameter.max())

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def cell_sizes(self) -> np.ndarray:
        return np.diff(self.cell_ptr)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    @cached_property
    def edge_cells(self) -> np.ndarray:
        """(E, 2) cellules adjacentes à chaque arête, -1 pour l'absente au bord."""
        cell_of = np.repeat(np.arange(self.n_cells), self.cell_sizes)
        out = np.full((self.n_edges, 2), -1, dtype=np.int64)
        order = np.argsort(self.cell_edges, kind="stable")
        e_sorted = self.cell_edges[order]
        starts = np.searchsorted(e_sorted, np.arange(self.n_edges))
        out[:, 0] = cell_of[order[starts]]
        interior = ~self.boundary_edges
        out[interior, 1] = cell_of[order[starts[interior] + 1]]
        return out

    @property
    def edge_tags(self) -> np.ndarray:
        """Étiquette de la première cellule adjacente (trace tangentielle continue)."""
        return self.tags[self.edge_cells[:, 0]]

    def cell_loop(self, c: int) -> np.ndarray:
        return self.cell_vertices[self.cell_ptr[c]:self.cell_ptr[c + 1]]

    def cell_polygon(self, c: int) -> Polygon:
        return Polygon(self.vertices[self.cell_loop(c)])

    @cached_property
    def groups(self) -> Dict[int, CellGroup]:
        out = {}
        sizes = self.cell_sizes
        for n in np.unique(sizes):
            cells = np.flatnonzero(sizes == n)
            idx = self.cell_ptr[cells][:, None] + np.arange(n)[None, :]
            out[int(n)] = CellGroup(
                cells=cells,
                vertices=self.cell_vertices[idx],
                edges=self.cell_edges[idx],
                signs=self.cell_signs[idx],
            )
        return out

    @cached_property
    def background_index(self) -> Dict[int, np.ndarray]:
        """Cellule de fond -> cellules filles, pour la localisation de points."""
        if self.background is None:
            return {}
        order = np.argsort(self.background, kind="stable")
        bg_sorted = self.background[order]
        keys, starts = np.unique(bg_sorted, return_index=True)
        bounds = np.append(starts, order.shape[0])
        return {int(k): order[bounds[i]:bounds[i + 1]] for i, k in enumerate(keys)}


@dataclass(frozen=True, eq=False)
class DofMap:
    """Un DoF par arête (∫_e v·t ds, orientation canonique) et un par sommet."""
    n_edge_dofs: int
    n_node_dofs: int
    edge_boundary: np.ndarray
    node_boundary: np.ndarray

    @property
    def free_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.edge_boundary)

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.node_boundary)
