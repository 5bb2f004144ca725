"""
Coefficients du problème et opérateurs élémentaires VEM.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.models.geometry import Region


class StabScale(str, Enum):
    """Poids de la stabilisation: h_K local ou h global."""
    LOCAL_HK = "local-hk"
    GLOBAL_H = "global-h"


class CoefficientField(BaseModel):
    """
    α et β constants par région (Ω+ / Ω-).

    β = ω²(ε + iσ/ω) = ω²ε + iωσ quand il est construit depuis la physique.
    """
    model_config = ConfigDict(frozen=True)

    alpha_plus: float = 1.0
    alpha_minus: float = 1.0
    beta_plus: complex = 1.0
    beta_minus: complex = 1.0

    # Grandeurs physiques (informatives)
    omega: Optional[float] = None
    eps_plus: Optional[float] = None
    eps_minus: Optional[float] = None
    sigma_plus: Optional[float] = None
    sigma_minus: Optional[float] = None

    @field_validator("alpha_plus", "alpha_minus")
    @classmethod
    def _alpha_positive(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError(f"alpha must be > 0, got {v}")
        return v

    @field_validator("beta_plus", "beta_minus")
    @classmethod
    def _beta_finite(cls, v: complex) -> complex:
        if not (np.isfinite(v.real) and np.isfinite(v.imag)):
            raise ValueError(f"beta must be finite, got {v}")
        return v

    @classmethod
    def from_physics(
        cls,
        omega: float,
        eps_plus: float,
        eps_minus: float,
        sigma_plus: float,
        sigma_minus: float,
        alpha_plus: float = 1.0,
        alpha_minus: float = 1.0,
    ) -> "CoefficientField":
        return cls(
            alpha_plus=alpha_plus,
            alpha_minus=alpha_minus,
            beta_plus=complex(omega ** 2 * eps_plus, omega * sigma_plus),
            beta_minus=complex(omega ** 2 * eps_minus, omega * sigma_minus),
            omega=omega,
            eps_plus=eps_plus,
            eps_minus=eps_minus,
            sigma_plus=sigma_plus,
            sigma_minus=sigma_minus,
        )

    @property
    def is_real(self) -> bool:
        return complex(self.beta_plus).imag == 0.0 and complex(self.beta_minus).imag == 0.0

    def alpha(self, tags: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(tags) == int(Region.MINUS), self.alpha_minus, self.alpha_plus)

    def beta(self, tags: np.ndarray) -> np.ndarray:
        return np.where(
            np.asarray(tags) == int(Region.MINUS),
            complex(self.beta_minus),
            complex(self.beta_plus),
        ).astype(complex)


@dataclass(frozen=True, eq=False)
class ElementOperators:
    """
    Opérateurs d'une cellule, exprimés sur les DoFs à orientation globale
    (colonnes dans l'ordre des arêtes locales).
    """
    cell: int
    P: np.ndarray      # (2, n)
    r: np.ndarray      # (n,)
    A: np.ndarray      # (n, n) rot-rot
    M: np.ndarray      # (n, n) masse projetée
    S: np.ndarray      # (n, n) stabilisation

    @property
    def b(self) -> np.ndarray:
        return self.M + self.S

    @property
    def a(self) -> np.ndarray:
        return self.A - self.M - self.S
