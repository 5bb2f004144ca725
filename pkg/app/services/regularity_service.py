"""
Service régularité: fonctions de forme r(θ), τ(θ), ϱ(κ0, κ1) et audit
d'un maillage contre les hypothèses (G1)-(G3).

L'audit est consultatif: il ne lève jamais, il rapporte.
"""
import csv
import json
from pathlib import Path
from typing import Tuple

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from app.core.exceptions import ExportError
from app.models.mesh import PolyMesh
from app.models.regularity import RegularityParams, RegularityReport


# =============================================================================
# FONCTIONS DE FORME
# =============================================================================

def r_of_theta(theta, kappa1: float):
    """r(θ) = 1 - κ1 (θ - 1/2)(θ - 1)."""
    theta = np.asarray(theta, dtype=float)
    out = 1.0 - kappa1 * (theta - 0.5) * (theta - 1.0)
    return float(out) if out.ndim == 0 else out


def tau_theta(theta, kappa0: float, kappa1: float):
    """
    τ(θ) = exp(1 + κ0 - r(θ) / (2(1 - θ))).

    τ(1) = 0 par continuité; τ(1/2) = exp(κ0).
    """
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r_of_theta(theta, kappa1))
    with np.errstate(divide="ignore"):
        expo = 1.0 + kappa0 - r / (2.0 * (1.0 - theta))
    out = np.where(theta >= 1.0, 0.0, np.exp(np.where(theta >= 1.0, 0.0, expo)))
    out = np.where(theta == 0.5, np.exp(kappa0), out)
    return float(out) if out.ndim == 0 else out


def log_tau_power(theta, kappa0: float, kappa1: float):
    """ln τ(θ)^(θ-1) = (θ - 1)(1 + κ0) + r(θ)/2, bien défini jusqu'à θ = 1."""
    theta = np.asarray(theta, dtype=float)
    out = (theta - 1.0) * (1.0 + kappa0) + 0.5 * np.asarray(r_of_theta(theta, kappa1))
    return float(out) if out.ndim == 0 else out


def varrho(kappa0: float, kappa1: float) -> float:
    """
    ϱ(κ0, κ1) = max_{θ ∈ (1/2, 1]} τ(θ)^(θ-1), forme fermée à trois branches
    selon la position du maximiseur θ* = 3/4 + (1 + κ0)/κ1.
    """
    if kappa1 <= 0.0:
        raise ValueError(f"kappa1 must be > 0, got {kappa1}")
    ratio = (kappa0 + 1.0) / kappa1
    if ratio > 0.25:
        return float(np.exp(0.5))
    if ratio < -0.25:
        return float(np.exp(-0.5 * kappa0))
    expo = (16.0 * kappa0 ** 2 - 8.0 * kappa0 * (kappa1 - 4.0) + (4.0 + kappa1) ** 2) / (32.0 * kappa1)
    return float(np.exp(expo))


def regularity_curve(kappa0: float, kappa1: float, n: int = 1000) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Échantillonnage de τ(θ) et τ(θ)^(θ-1) sur (1/2, 1]."""
    theta = np.linspace(0.5, 1.0, n + 1)[1:]
    return theta, tau_theta(theta, kappa0, kappa1), np.exp(log_tau_power(theta, kappa0, kappa1))


# =============================================================================
# AUDIT
# =============================================================================

def _block_overlap(mesh: PolyMesh) -> np.ndarray:
    """
    Nombre de cellules rencontrant la boule de diamètre 3 h_K centrée au
    centroïde de K. Test conservatif par cercles englobants.
    """
    m = mesh.metrics
    centroid = m.centroid
    sizes = mesh.cell_sizes
    cell_of = np.repeat(np.arange(mesh.n_cells), sizes)
    d = np.hypot(*(mesh.vertices[mesh.cell_vertices] - centroid[cell_of]).T)
    bound = np.zeros(mesh.n_cells)
    np.maximum.at(bound, cell_of, d)

    tree = cKDTree(centroid)
    reach = 1.5 * m.diameter + bound.max()
    overlap = np.zeros(mesh.n_cells, dtype=np.int64)
    for c, near in enumerate(tree.query_ball_point(centroid, reach)):
        near = np.asarray(near, dtype=np.int64)
        dist = np.hypot(*(centroid[near] - centroid[c]).T)
        overlap[c] = int(np.count_nonzero(dist <= 1.5 * m.diameter[c] + bound[near]))
    return overlap


def audit_mesh(mesh: PolyMesh, params: RegularityParams) -> RegularityReport:
    m = mesh.metrics
    tau = tau_theta(params.theta, params.kappa0, params.kappa1)
    ratio = m.star_radius / m.diameter
    g1_pass = m.star_radius >= tau * m.diameter

    cell_of = np.repeat(np.arange(mesh.n_cells), mesh.cell_sizes)
    h_k = m.diameter[cell_of]
    area = m.area[cell_of]
    h_e = m.edge_lengths
    l_e = m.supporting_heights
    c1_needed = h_e * h_k / area
    c2_needed = np.maximum(h_k / h_e, h_e * l_e / area)
    condition = np.where(c1_needed / params.c1 <= c2_needed / params.c2, 1, 2).astype(np.int8)

    report = RegularityReport(
        params=params,
        tau=tau,
        varrho=varrho(params.kappa0, params.kappa1),
        h_k=m.diameter,
        rho_k=m.star_radius,
        rho_ratio=ratio,
        g1_pass=g1_pass,
        c1_needed=c1_needed,
        c2_needed=c2_needed,
        g2_condition=condition,
        overlap=_block_overlap(mesh),
    )
    if not report.g1_ok:
        logger.warning(
            "(G1) violated on {} cells (worst rho/h = {:.3e}, tau = {:.3e})",
            int((~g1_pass).sum()), report.worst_rho_ratio, tau,
        )
    logger.debug(
        "Regularity audit: worst c1={:.3g}, worst c2={:.3g}, max overlap={}",
        report.worst_c1, report.worst_c2, report.max_overlap,
    )
    return report


def write_report_csv(report: RegularityReport, path: str) -> None:
    """CSV par cellule: id, h_K, ρ_K, τ(θ)h_K, pass."""
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cell", "h_K", "rho_K", "tau_h_K", "pass"])
            for c in range(report.h_k.shape[0]):
                writer.writerow([
                    c,
                    "%.10e" % report.h_k[c],
                    "%.10e" % report.rho_k[c],
                    "%.10e" % (report.tau * report.h_k[c]),
                    int(report.g1_pass[c]),
                ])
    except OSError as exc:
        raise ExportError(f"Cannot write regularity report {path}: {exc}") from exc


def write_report_summary(report: RegularityReport, path: str) -> None:
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ExportError(f"Cannot write regularity summary {path}: {exc}") from exc
