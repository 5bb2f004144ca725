"""
Système linéaire global et rapport de résolution.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """
    Système complexe symétrique sur les DoFs libres.

    free[i] est l'indice global de la ligne i de A; les DoFs `constrained`
    portent les valeurs imposées `values`.
    """
    A: csr_matrix
    b: np.ndarray
    free: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    n_total: int = 0
    symmetric: bool = True

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Vecteur global (libres + imposés)."""
        out = np.zeros(self.n_total, dtype=complex)
        out[self.free] = x
        out[self.constrained] = self.values
        return out


@dataclass(frozen=True, eq=False)
class SolveReport:
    dofs: np.ndarray
    residual: float
    nnz: int
    fill: float
    wall_time: float
    n_free: int
