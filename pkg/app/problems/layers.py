"""
Couches minces horizontales (2 ou 5 bandes de largeur 0.02), ω = 100;
auto-convergence contre un niveau de référence.
"""
from typing import Sequence, Tuple

import numpy as np

from app.models.geometry import InterfaceSpec, Line
from app.models.vem import CoefficientField
from app.problems.base import BaseProblem, gaussian_line_source

TWO_LAYERS = ((0.24, 0.26), (0.74, 0.76))
FIVE_LAYERS = ((0.09, 0.11), (0.24, 0.26), (0.49, 0.51), (0.74, 0.76), (0.89, 0.91))


def band_interface(bands: Sequence[Tuple[float, float]]) -> InterfaceSpec:
    """Union de bandes a < y < b: deux droites par bande, une clause par bande."""
    primitives = []
    clauses = []
    for a, b in bands:
        i = len(primitives)
        primitives.append(Line(point=(0.0, a), normal=(0.0, -1.0)))
        primitives.append(Line(point=(0.0, b), normal=(0.0, 1.0)))
        clauses.append((i, i + 1))
    return InterfaceSpec(primitives=tuple(primitives), minus_clauses=tuple(clauses))


class LayersProblem(BaseProblem):
    name = "layers"
    domain = (0.0, 4.0, 0.0, 1.0)

    def __init__(
        self,
        layers: int = 2,
        omega: float = 100.0,
        eps: float = 0.01,
        sigma_minus: float = 1.0,
        sigma_plus: float = 0.1,
        alpha: float = 1.0,
    ):
        if layers not in (2, 5):
            raise ValueError(f"layers must be 2 or 5, got {layers}")
        self.layers = layers
        self.bands = TWO_LAYERS if layers == 2 else FIVE_LAYERS
        self.omega = omega
        self.eps = eps
        self.coeffs = CoefficientField.from_physics(
            omega=omega,
            eps_plus=eps,
            eps_minus=eps,
            sigma_plus=sigma_plus,
            sigma_minus=sigma_minus,
            alpha_plus=alpha,
            alpha_minus=alpha,
        )
        self.sharp_source = eps < 0.1

    def interface(self) -> InterfaceSpec:
        return band_interface(self.bands)

    def coefficients(self) -> CoefficientField:
        return self.coeffs

    def source(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        return gaussian_line_source(points, self.omega, self.eps)
