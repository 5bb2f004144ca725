"""
Rapports d'erreur et tables de convergence.
"""
from dataclasses import dataclass, field
from typing import List, Optional


@dataclass(frozen=True)
class ErrorReport:
    l2_proj_error: float
    rot_error: float
    b_norm: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    l2_err: float
    l2_order: Optional[float]
    rot_err: float
    rot_order: Optional[float]


@dataclass(frozen=True)
class ConvergenceTable:
    rows: List[ConvergenceRow] = field(default_factory=list)

    @property
    def l2_orders(self) -> List[Optional[float]]:
        return [r.l2_order for r in self.rows[1:]]

    @property
    def rot_orders(self) -> List[Optional[float]]:
        return [r.rot_order for r in self.rows[1:]]
