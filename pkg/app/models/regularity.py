"""
Paramètres et rapport de l'audit de régularité (G1)-(G3).
"""
from dataclasses import dataclass
from typing import Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator


class RegularityParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: float = 0.9
    kappa0: float = -1.0
    kappa1: float = 60.0

    # Constantes (G2) de référence
    c1: float = 1.0
    c2: float = 1.0

    @field_validator("theta")
    @classmethod
    def _theta_range(cls, v: float) -> float:
        if not 0.5 < v <= 1.0:
            raise ValueError(f"theta must lie in (0.5, 1], got {v}")
        return v

    @field_validator("kappa0")
    @classmethod
    def _kappa0_negative(cls, v: float) -> float:
        if v >= 0.0:
            raise ValueError(f"kappa0 must be < 0, got {v}")
        return v

    @field_validator("kappa1", "c1", "c2")
    @classmethod
    def _positive(cls, v: float) -> float:
        if v <= 0.0:
            raise ValueError(f"must be > 0, got {v}")
        return v


@dataclass(frozen=True, eq=False)
class RegularityReport:
    """
    Rapport d'audit. Tableaux par cellule (rho_ratio, g1_pass, overlap),
    par arête locale alignée sur mesh.cell_edges (c1_needed, c2_needed,
    g2_condition: 1 ou 2).
    """
    params: RegularityParams
    tau: float
    varrho: float
    h_k: np.ndarray
    rho_k: np.ndarray
    rho_ratio: np.ndarray
    g1_pass: np.ndarray
    c1_needed: np.ndarray
    c2_needed: np.ndarray
    g2_condition: np.ndarray
    overlap: np.ndarray

    @property
    def worst_rho_ratio(self) -> float:
        return float(self.rho_ratio.min())

    @property
    def worst_c1(self) -> float:
        sel = self.g2_condition == 1
        return float(self.c1_needed[sel].max()) if sel.any() else 0.0

    @property
    def worst_c2(self) -> float:
        sel = self.g2_condition == 2
        return float(self.c2_needed[sel].max()) if sel.any() else 0.0

    @property
    def g1_ok(self) -> bool:
        return bool(self.g1_pass.all())

    @property
    def g2_ok(self) -> bool:
        """Chaque arête satisfait une des conditions avec les constantes de référence."""
        ok1 = self.c1_needed <= self.params.c1
        ok2 = self.c2_needed <= self.params.c2
        return bool(np.all(ok1 | ok2))

    @property
    def max_overlap(self) -> int:
        return int(self.overlap.max())

    def summary(self) -> Dict[str, object]:
        return {
            "theta": self.params.theta,
            "kappa0": self.params.kappa0,
            "kappa1": self.params.kappa1,
            "tau": self.tau,
            "varrho": self.varrho,
            "n_cells": int(self.h_k.shape[0]),
            "worst_rho_ratio": self.worst_rho_ratio,
            "g1_failures": int((~self.g1_pass).sum()),
            "g1_ok": self.g1_ok,
            "worst_c1": self.worst_c1,
            "worst_c2": self.worst_c2,
            "g2_ok": self.g2_ok,
            "max_overlap": self.max_overlap,
        }
