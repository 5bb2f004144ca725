"""
Triangulation conforme du maillage coupé et solution Nédélec (ND0).
"""
from dataclasses import dataclass

import numpy as np

from app.models.mesh import PolyMesh
from app.models.system import SolveReport


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Maillage triangulaire (PolyMesh dont toutes les cellules sont des
    triangles CCW); parent[t] est la cellule polygonale d'origine.
    """
    mesh: PolyMesh
    parent: np.ndarray

    @property
    def triangles(self) -> np.ndarray:
        return self.mesh.cell_vertices.reshape(-1, 3)

    @property
    def n_triangles(self) -> int:
        return self.mesh.n_cells


@dataclass(frozen=True, eq=False)
class Nd0Solution:
    """DoFs ∫_e u·t ds (même convention que les DoFs VEM)."""
    dofs: np.ndarray
    report: SolveReport
