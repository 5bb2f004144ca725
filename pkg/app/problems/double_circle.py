"""
Interface formée de deux cercles sécants (point anguleux), milieu
conducteur, source gaussienne quasi linéique; pas de solution exacte
(auto-convergence contre un niveau de référence).
"""
import numpy as np

from app.models.geometry import Circle, InterfaceSpec
from app.models.vem import CoefficientField
from app.problems.base import BaseProblem, gaussian_line_source


class DoubleCircleProblem(BaseProblem):
    name = "double_circle"
    domain = (0.0, 4.0, 0.0, 1.0)

    def __init__(
        self,
        omega: float = 5.0,
        eps: float = 0.5,
        sigma_minus: float = 1.0,
        sigma_plus: float = 0.1,
        radius: float = 0.35,
        alpha: float = 1.0,
    ):
        self.omega = omega
        self.eps = eps
        self.radius = radius
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
        return InterfaceSpec(
            primitives=(Circle((1.25, 0.0), self.radius), Circle((1.75, 0.0), self.radius)),
            minus_clauses=((0,), (1,)),
        )

    def coefficients(self) -> CoefficientField:
        return self.coeffs

    def source(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        return gaussian_line_source(points, self.omega, self.eps)
