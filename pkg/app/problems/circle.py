"""
Interface circulaire, solution exacte régulière par morceaux.

u = f(ρ) (y, x) avec ρ = x² + y²:
    f⁻ = -k0 (r0² - ρ),  f⁺ = -(k1/10)(r0² - ρ)(r1² - ρ)
rot u = 2 f'(ρ)(x² - y²); [u·t] = 0 et [α rot u] = 0 sur |x| = r0.
"""
import math
from typing import Optional

import numpy as np

from app.models.geometry import Circle, InterfaceSpec, Region
from app.models.vem import CoefficientField
from app.problems.base import BaseProblem


class CircleProblem(BaseProblem):
    name = "circle"
    domain = (-1.0, 1.0, -1.0, 1.0)
    has_exact = True

    def __init__(
        self,
        r0: float = math.pi / 5,
        r1: float = 1.0,
        k1: float = 20.0,
        alpha_minus: float = 1.0,
        alpha_plus: float = 10.0,
        beta_minus: float = 1.0,
        beta_plus: float = 10.0,
    ):
        self.r0 = r0
        self.r1 = r1
        self.k1 = k1
        self.k0 = k1 * (r1 ** 2 - r0 ** 2)
        self.coeffs = CoefficientField(
            alpha_plus=alpha_plus,
            alpha_minus=alpha_minus,
            beta_plus=beta_plus,
            beta_minus=beta_minus,
        )

    def interface(self) -> InterfaceSpec:
        return InterfaceSpec(primitives=(Circle((0.0, 0.0), self.r0),), minus_clauses=((0,),))

    def coefficients(self) -> CoefficientField:
        return self.coeffs

    # f, f', f'' par région
    def _radial(self, rho: np.ndarray, minus: np.ndarray):
        a, b, c = self.r0 ** 2, self.r1 ** 2, self.k1 / 10.0
        f = np.where(minus, -self.k0 * (a - rho), -c * (a - rho) * (b - rho))
        df = np.where(minus, self.k0, c * (a + b - 2.0 * rho))
        d2f = np.where(minus, 0.0, -2.0 * c)
        return f, df, d2f

    def exact(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        f, _, _ = self._radial(x * x + y * y, tags == int(Region.MINUS))
        return np.column_stack([f * y, f * x]).astype(complex)

    def rot_exact(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        _, df, _ = self._radial(x * x + y * y, tags == int(Region.MINUS))
        return (2.0 * df * (x * x - y * y)).astype(complex)

    def source(self, points: np.ndarray, tags: np.ndarray) -> np.ndarray:
        """f = vect-rot(α rot u) - β u, avec vect-rot w = (∂y w, -∂x w)."""
        x, y = points[:, 0], points[:, 1]
        rho = x * x + y * y
        f, df, d2f = self._radial(rho, tags == int(Region.MINUS))
        alpha = self.coeffs.alpha(tags)
        beta = self.coeffs.beta(tags)
        q = x * x - y * y
        dw_dx = 2.0 * alpha * (2.0 * x * d2f * q + 2.0 * x * df)
        dw_dy = 2.0 * alpha * (2.0 * y * d2f * q - 2.0 * y * df)
        return np.column_stack([dw_dy - beta * f * y, -dw_dx - beta * f * x])
