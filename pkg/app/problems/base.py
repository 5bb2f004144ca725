"""
Problème modèle: domaine, interface, coefficients, source, données au bord
et (si connue) solution exacte. La branche de la solution exacte est
choisie par l'étiquette de région passée avec les points.
"""
from typing import Optional, Tuple

import numpy as np

from app.models.geometry import InterfaceSpec, Line
from app.models.vem import CoefficientField


class BaseProblem:
    name: str
    domain: Tuple[float, float, float, float]

    # Droite le long de laquelle la solution est singulière (quadrature graduée)
    singular: Optional[Line] = None
    # Source quasi linéique: quadrature adaptative
    sharp_source: bool = False
    has_exact: bool = False

    def interface(self) -> InterfaceSpec:
        raise NotImplementedError

    def coefficients(self) -> CoefficientField:
        raise NotImplementedError

    def source(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no closed-form solution")

    def rot_exact(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no closed-form solution")

    def boundary(self):
        """Données tangentielles g (None: g = 0)."""
        return self.exact if self.has_exact else None

    def describe(self) -> dict:
        return {
            "name": self.name,
            "domain": list(self.domain),
            "has_exact": self.has_exact,
            "coefficients": self.coefficients().model_dump(mode="json"),
        }


def gaussian_line_source(points: np.ndarray, omega: float, width: float, x0: float = 3.0) -> np.ndarray:
    """f = -iω (0, 1) exp(-(x - x0)² / width²)."""
    out = np.zeros((points.shape[0], 2), dtype=complex)
    out[:, 1] = -1j * omega * np.exp(-((points[:, 0] - x0) ** 2) / width ** 2)
    return out
