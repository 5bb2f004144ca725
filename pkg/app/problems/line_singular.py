"""
Interface droite x = ε très proche d'une ligne de la grille (cellules
très minces), solution de régularité réduite:

    u = (|x - ε|^s + cos(x + y), sin(x + y)),  Ω⁻ = {x > ε}.

rot u = cos(x + y) + sin(x + y) (la partie singulière ne dépend que de x);
f = vect-rot(α rot u) - β u = α(cos - sin, sin - cos) - β u.
"""
import numpy as np

from app.models.geometry import InterfaceSpec, Line
from app.models.vem import CoefficientField
from app.problems.base import BaseProblem


class LineSingularProblem(BaseProblem):
    name = "line_singular"
    domain = (-1.0, 1.0, -1.0, 1.0)
    has_exact = True

    def __init__(
        self,
        s: float = 0.2,
        offset: float = 1e-7,
        alpha: float = 1.0,
        beta_minus: float = 1.0,
        beta_plus: float = 2.0,
    ):
        if not s > -0.5:
            raise ValueError(f"s must be > -0.5 for a square-integrable solution, got {s}")
        self.s = s
        self.offset = offset
        self.coeffs = CoefficientField(
            alpha_plus=alpha,
            alpha_minus=alpha,
            beta_plus=beta_plus,
            beta_minus=beta_minus,
        )
        # Ω⁻ du côté négatif de la normale (-1, 0)
        self.line = Line(point=(offset, 0.0), normal=(-1.0, 0.0))
        self.singular = self.line if s < 1.0 else None

    def interface(self) -> InterfaceSpec:
        return InterfaceSpec(primitives=(self.line,), minus_clauses=((0,),))

    def coefficients(self) -> CoefficientField:
        return self.coeffs

    def _power(self, x: np.ndarray) -> np.ndarray:
        d = np.abs(x - self.offset)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d > 0.0, d ** self.s, 0.0)

    def exact(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        return np.column_stack([self._power(x) + np.cos(x + y), np.sin(x + y)]).astype(complex)

    def rot_exact(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        t = points[:, 0] + points[:, 1]
        return (np.cos(t) + np.sin(t)).astype(complex)

    def source(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        t = points[:, 0] + points[:, 1]
        alpha = self.coeffs.alpha(tags)
        beta = self.coeffs.beta(tags)
        curl = np.column_stack([alpha * (np.cos(t) - np.sin(t)), alpha * (np.sin(t) - np.cos(t))])
        return curl - beta[:, None] * self.exact(points, tags)
