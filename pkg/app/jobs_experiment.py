"""
Jobs d'expérience - Étude de convergence d'un exemple sur une suite de
niveaux h = 2^-k.

Ce module:
1. Construit le maillage coupé de chaque niveau et audite sa régularité
2. Assemble et résout le système VEM, calcule les erreurs (solution exacte
   ou solution de référence calculée une seule fois au niveau le plus fin)
3. Exporte les champs (VTK), la table de convergence (CSV) et un résumé JSON
4. Optionnellement résout le même problème en Nédélec (ND0) pour comparaison

Un niveau en échec est enregistré et le run continue sur les suivants.
"""
import json
import math
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import ExportError, VemError, is_recoverable
from app.core.logging import get_logger, set_run_id, timed
from app.models.experiment import ExperimentConfig, ExperimentResult, LevelResult, dump_config
from app.models.mesh import GridSpec, PolyMesh
from app.models.postproc import ConvergenceRow, ConvergenceTable
from app.models.system import SolveReport
from app.problems import BaseProblem, get_problem
from app.services.mesh_service import build_cut_mesh, interface_mismatch
from app.services.nedelec_service import (
    nd0_cell_means,
    nd0_errors,
    nd0_solve,
    parent_means,
    triangulate_mesh,
)
from app.services.postproc_service import (
    compare_fields,
    compute_errors,
    cross_compare_report,
    export_field,
    order_table,
    write_table_csv,
)
from app.services.regularity_service import audit_mesh, write_report_csv, write_report_summary
from app.services.system_service import solve_problem

logger = get_logger(__name__)


# =============================================================================
# ÉTAPES D'UN NIVEAU
# =============================================================================

@timed(logger)
def build_level_mesh(problem: BaseProblem, level: int) -> PolyMesh:
    grid = GridSpec.from_h(problem.domain, 2.0 ** -level)
    return build_cut_mesh(grid, problem.interface())


@timed(logger)
def solve_level(
    problem: BaseProblem,
    mesh: PolyMesh,
    config: ExperimentConfig,
) -> SolveReport:
    return solve_problem(
        mesh,
        problem.coefficients(),
        problem.source,
        g=problem.boundary(),
        quad_order=config.quad_order,
        stab=config.stab,
        singular=problem.singular,
        adaptive=problem.sharp_source,
    )


def _audit_level(problem: BaseProblem, mesh: PolyMesh, config: ExperimentConfig, out: Path, result: LevelResult) -> None:
    report = audit_mesh(mesh, config.regularity)
    write_report_csv(report, str(out / f"regularity_k{result.level}.csv"))
    write_report_summary(report, str(out / f"regularity_k{result.level}.json"))
    gap, ratio = interface_mismatch(mesh, problem.interface())
    result.g1_ok = report.g1_ok
    result.worst_rho_ratio = report.worst_rho_ratio
    result.interface_gap = gap
    logger.debug(
        "Mesh audited",
        example=problem.name,
        level_k=result.level,
        g1_ok=report.g1_ok,
        worst_rho_ratio=report.worst_rho_ratio,
        interface_gap=gap,
        interface_gap_over_h2=ratio,
    )


def _fem_level(
    problem: BaseProblem,
    mesh: PolyMesh,
    dofs: np.ndarray,
    config: ExperimentConfig,
    result: LevelResult,
) -> None:
    tri = triangulate_mesh(mesh)
    solution = nd0_solve(
        tri,
        problem.coefficients(),
        problem.source,
        g=problem.boundary(),
        quad_order=config.quad_order,
        singular=problem.singular,
        adaptive=problem.sharp_source,
    )
    means = parent_means(tri, nd0_cell_means(tri, solution.dofs), mesh.n_cells)
    result.fem_rel_diff = compare_fields(mesh, dofs, means)
    if problem.has_exact:
        errors = nd0_errors(
            tri, solution.dofs, problem.exact, problem.rot_exact,
            quad_order=config.quad_order, singular=problem.singular,
        )
        result.fem_l2_err = errors.l2_proj_error
        result.fem_rot_err = errors.rot_error


def run_level(
    problem: BaseProblem,
    level: int,
    config: ExperimentConfig,
    out: Path,
    reference: Optional[Tuple[PolyMesh, np.ndarray]] = None,
) -> LevelResult:
    """Un niveau complet; les exceptions remontent à l'appelant."""
    result = LevelResult(level=level, h=2.0 ** -level)
    mesh = build_level_mesh(problem, level)
    result.n_cells = mesh.n_cells
    result.n_dofs = mesh.n_edges
    _audit_level(problem, mesh, config, out, result)
    if config.audit_only:
        result.ok = True
        return result

    report = solve_level(problem, mesh, config)
    result.residual = report.residual

    if problem.has_exact:
        errors = compute_errors(
            mesh, report.dofs, problem.exact, problem.rot_exact,
            quad_order=config.quad_order, singular=problem.singular,
        )
    else:
        if reference is None:
            raise VemError("Reference solution unavailable", level=level)
        errors = cross_compare_report(reference, (mesh, report.dofs), config.quad_order)
    result.l2_err = errors.l2_proj_error
    result.rot_err = errors.rot_error

    export_field(mesh, report.dofs, str(out / f"field_k{level}.vtk"))
    if config.fem:
        _fem_level(problem, mesh, report.dofs, config, result)
    result.ok = True
    return result


# =============================================================================
# EXPÉRIENCE
# =============================================================================

def _build_table(results, attr_l2: str, attr_rot: str) -> ConvergenceTable:
    levels = [r.level for r in results]
    hs = [r.h for r in results]
    l2 = [_nan(getattr(r, attr_l2)) for r in results]
    rot = [_nan(getattr(r, attr_rot)) for r in results]
    if len(results) >= 2:
        return order_table(levels, hs, l2, rot)
    return ConvergenceTable(rows=[
        ConvergenceRow(level=r.level, h=r.h, l2_err=e, l2_order=None, rot_err=q, rot_order=None)
        for r, e, q in zip(results, l2, rot)
    ])


def _nan(value: Optional[float]) -> float:
    return float("nan") if value is None else float(value)


def _consecutive(levels) -> bool:
    return all(b == a + 1 for a, b in zip(levels, levels[1:]))


def compute_reference(problem: BaseProblem, config: ExperimentConfig) -> Tuple[PolyMesh, np.ndarray]:
    level = config.reference_level()
    start = time.perf_counter()
    mesh = build_level_mesh(problem, level)
    report = solve_level(problem, mesh, config)
    logger.info(
        "Reference solution computed",
        example=problem.name,
        level_k=level,
        duration_ms=(time.perf_counter() - start) * 1000,
        n_dofs=mesh.n_edges,
    )
    return mesh, report.dofs


def write_summary(result: ExperimentResult, config: ExperimentConfig, problem: BaseProblem, path: Path) -> None:
    payload = {
        "run_id": result.run_id,
        "example": result.example,
        "ok": result.ok,
        "failed_levels": result.failed_levels,
        "reference_level": result.reference_level,
        "problem": problem.describe(),
        "config": config.model_dump(mode="json"),
        "levels": [asdict(r) for r in result.levels],
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        raise ExportError(f"Cannot write summary {path}: {exc}") from exc


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Exécute l'expérience décrite par `config` et écrit dans config.out:
    config.ini, regularity_k*.csv/json, field_k*.vtk, table.csv
    (table_nd0.csv avec --fem et solution exacte) et summary.json.

    Returns:
        ExperimentResult (ok seulement si tous les niveaux ont abouti)
    """
    run_id = set_run_id()
    problem = get_problem(config.example, **config.problem_params())
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, str(out / "config.ini"))

    result = ExperimentResult(example=config.example, run_id=run_id)
    logger.info(
        "Experiment started",
        example=config.example,
        levels=list(config.levels),
        stab=config.stab.value,
        audit_only=config.audit_only,
    )

    reference = None
    reference_error: Optional[Exception] = None
    if not problem.has_exact and not config.audit_only:
        result.reference_level = config.reference_level()
        try:
            reference = compute_reference(problem, config)
        except Exception as e:
            reference_error = e
            logger.level_error(config.example, result.reference_level, e)

    for level in config.levels:
        logger.level_start(config.example, level)
        start = time.perf_counter()
        try:
            if reference_error is not None:
                raise VemError(f"Reference level failed: {reference_error}", level=result.reference_level)
            level_result = run_level(problem, level, config, out, reference)
            level_result.duration_ms = (time.perf_counter() - start) * 1000
            logger.level_success(
                config.example,
                level,
                duration_ms=level_result.duration_ms,
                n_dofs=level_result.n_dofs,
                l2_err=None if math.isnan(level_result.l2_err) else level_result.l2_err,
                rot_err=None if math.isnan(level_result.rot_err) else level_result.rot_err,
                residual=level_result.residual,
            )
        except Exception as e:
            duration_ms = (time.perf_counter() - start) * 1000
            level_result = LevelResult(
                level=level,
                h=2.0 ** -level,
                duration_ms=duration_ms,
                error=str(e),
                error_type=type(e).__name__,
            )
            if isinstance(e, VemError) or is_recoverable(e):
                logger.level_error(config.example, level, e, duration_ms=duration_ms)
            else:
                logger.error(
                    f"Unexpected failure on level {level}: {e}",
                    example=config.example,
                    level_k=level,
                    error_type=type(e).__name__,
                )
        result.levels.append(level_result)

    if not config.audit_only:
        if _consecutive(list(config.levels)):
            write_table_csv(_build_table(result.levels, "l2_err", "rot_err"), str(out / "table.csv"))
            if config.fem and problem.has_exact:
                write_table_csv(
                    _build_table(result.levels, "fem_l2_err", "fem_rot_err"),
                    str(out / "table_nd0.csv"),
                )
        else:
            logger.warning("Levels are not consecutive, no convergence table written", example=config.example)

    write_summary(result, config, problem, out / "summary.json")
    logger.info(
        "Experiment completed",
        example=config.example,
        ok=result.ok,
        failed_levels=result.failed_levels or None,
    )
    return result
