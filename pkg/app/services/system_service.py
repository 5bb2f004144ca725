"""
Service système: assemblage global, conditions tangentielles essentielles,
second membre et résolution directe creuse (LU complexe).

Formes bilinéaires non conjuguées: le système est complexe symétrique
(A = Aᵀ), pas hermitien.
"""
import time
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger
from scipy.io import mmwrite
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from app.core.config import QUAD_ORDER, RESIDUAL_TOL
from app.core.exceptions import ExportError, QuadratureError, ResidualError, SingularSystemError
from app.models.geometry import Line
from app.models.mesh import PolyMesh
from app.models.system import LinearSystem, SolveReport
from app.models.vem import CoefficientField, StabScale
from app.services.mesh_service import integrate_cells, mesh_quadrature
from app.services.vem_service import (
    VectorField,
    interpolate_edge,
    iter_group_operators,
    log_operator_sizes,
    scatter,
)


# =============================================================================
# ASSEMBLAGE
# =============================================================================

def cell_source_integrals(
    mesh: PolyMesh,
    source: VectorField,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
    adaptive: bool = False,
) -> np.ndarray:
    """∫_K f dx pour chaque cellule, (C, 2) complexe."""
    tags = mesh.tags

    def sampled(points: np.ndarray, owner: np.ndarray) -> np.ndarray:
        return source(points, tags[owner])

    pts, w, owner = mesh_quadrature(
        mesh, quad_order, singular=singular, sharp=sampled if adaptive else None
    )
    vals = np.asarray(sampled(pts, owner), dtype=complex)
    if not np.all(np.isfinite(vals)):
        bad = int(np.argwhere(~np.isfinite(vals))[0, 0])
        raise QuadratureError("Non-finite source sample", location=tuple(pts[bad]))
    return integrate_cells(mesh, vals, w, owner)


def assemble(
    mesh: PolyMesh,
    coeffs: CoefficientField,
    source: Optional[VectorField],
    quad_order: int = QUAD_ORDER,
    stab: StabScale = StabScale.LOCAL_HK,
    singular: Optional[Line] = None,
    adaptive: bool = False,
) -> LinearSystem:
    """
    A = Σ scatter(A_K - M_K - S_K);  b_i = Σ_K (∫_K f)·Π_K φ_i.

    source=None équivaut à f = 0.
    """
    log_operator_sizes(mesh)
    if source is None:
        F = np.zeros((mesh.n_cells, 2), dtype=complex)
    else:
        F = cell_source_integrals(mesh, source, quad_order, singular, adaptive)

    blocks = []
    rhs = np.zeros(mesh.n_edges, dtype=complex)
    for group, ops in iter_group_operators(mesh, coeffs, stab):
        blocks.append((group.edges, ops["A"] - ops["M"] - ops["S"]))
        contrib = np.einsum("mk,mkn->mn", F[group.cells], ops["P"])
        np.add.at(rhs, group.edges, contrib)
    A = scatter(mesh.n_edges, blocks)
    logger.debug("Assembled system: {} dofs, nnz={}", mesh.n_edges, A.nnz)
    return LinearSystem(
        A=A,
        b=rhs,
        free=np.arange(mesh.n_edges),
        n_total=mesh.n_edges,
    )


def set_tangential_bc(
    sys: LinearSystem,
    mesh: PolyMesh,
    g: Optional[VectorField] = None,
    quad_order: int = QUAD_ORDER,
    singular: Optional[Line] = None,
) -> LinearSystem:
    """
    DoFs de bord imposés à ∫_e g·t ds puis éliminés symétriquement:
    b_f <- b_f - A_fc g_c, lignes et colonnes contraintes supprimées.
    """
    constrained = np.flatnonzero(mesh.boundary_edges)
    free = np.flatnonzero(~mesh.boundary_edges)
    if g is None:
        values = np.zeros(constrained.shape[0], dtype=complex)
    else:
        values = interpolate_edge(g, mesh, quad_order, singular=singular, edges=constrained)

    A = sys.A.tocsr()
    b = sys.b[free] - A[free][:, constrained] @ values
    return LinearSystem(
        A=A[free][:, free].tocsr(),
        b=b,
        free=free,
        constrained=constrained,
        values=values,
        n_total=sys.n_total,
        symmetric=sys.symmetric,
    )


# =============================================================================
# RÉSOLUTION
# =============================================================================

def solve(sys: LinearSystem, residual_tol: float = RESIDUAL_TOL) -> SolveReport:
    """
    Factorisation LU creuse (pivotage) et contrôle du résidu relatif.

    Raises:
        SingularSystemError: facteur singulier (β proche d'une valeur propre discrète)
        ResidualError: ‖Ax - b‖/‖b‖ > residual_tol
    """
    start = time.perf_counter()
    A = csc_matrix(sys.A, dtype=complex)
    b = np.asarray(sys.b, dtype=complex)
    if sys.size == 0:
        return SolveReport(sys.expand(np.zeros(0, dtype=complex)), 0.0, 0, 0.0, 0.0, 0)
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(
            f"Sparse LU failed ({exc}); beta may hit a discrete eigenvalue, "
            f"try another omega or mesh size"
        ) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(
            "Non-finite solution; beta may hit a discrete eigenvalue, try another omega or mesh size"
        )

    norm_b = float(np.linalg.norm(b))
    residual = float(np.linalg.norm(A @ x - b)) / (norm_b if norm_b > 0.0 else 1.0)
    fill = (lu.L.nnz + lu.U.nnz) / max(A.nnz, 1)
    elapsed = time.perf_counter() - start
    logger.debug(
        "Solved {} dofs in {:.3f}s (residual={:.2e}, fill={:.2f})",
        sys.size, elapsed, residual, fill,
    )
    if residual > residual_tol:
        raise ResidualError(
            f"Relative residual {residual:.3e} above tolerance {residual_tol:.1e}",
            residual=residual,
        )
    return SolveReport(
        dofs=sys.expand(x),
        residual=residual,
        nnz=int(A.nnz),
        fill=float(fill),
        wall_time=elapsed,
        n_free=sys.size,
    )


def solve_problem(
    mesh: PolyMesh,
    coeffs: CoefficientField,
    source: Optional[VectorField],
    g: Optional[VectorField] = None,
    quad_order: int = QUAD_ORDER,
    stab: StabScale = StabScale.LOCAL_HK,
    singular: Optional[Line] = None,
    adaptive: bool = False,
) -> SolveReport:
    """Assemblage, conditions au bord et résolution en un appel."""
    sys = assemble(mesh, coeffs, source, quad_order, stab, singular, adaptive)
    sys = set_tangential_bc(sys, mesh, g, quad_order, singular)
    return solve(sys)


def dump_matrix_market(sys: LinearSystem, path: str) -> None:
    """Écrit A (Matrix Market) et b (path + '.rhs') pour le débogage."""
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        mmwrite(str(target), sys.A, field="complex", symmetry="symmetric" if sys.symmetric else "general")
        np.savetxt(str(target) + ".rhs", np.column_stack([sys.b.real, sys.b.imag]), fmt="%.17g")
    except OSError as exc:
        raise ExportError(f"Cannot write matrix {path}: {exc}") from exc
