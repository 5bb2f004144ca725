"""
Écriture / relecture VTK legacy ASCII (UNSTRUCTURED_GRID, cellules VTK_POLYGON).

Sortie déterministe: flottants formatés en "%.17g", ordre des tableaux fixé
par l'ordre d'insertion des dictionnaires.
"""
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.core.exceptions import ExportError

VTK_POLYGON = 7


def _fmt(values: np.ndarray) -> str:
    return " ".join("%.17g" % v for v in values)


def write_polygon_vtk(
    path: str,
    vertices: np.ndarray,
    loops: Sequence[np.ndarray],
    cell_scalars: Optional[Mapping[str, np.ndarray]] = None,
    cell_vectors: Optional[Mapping[str, np.ndarray]] = None,
    title: str = "polygonal mesh",
) -> None:
    """
    Args:
        cell_scalars: nom -> (n_cells,) ou (n_cells, k) (SCALARS à k composantes)
        cell_vectors: nom -> (n_cells, 2), complété par z = 0
    """
    n_cells = len(loops)
    lines: List[str] = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {vertices.shape[0]} double")
    for p in vertices:
        lines.append(_fmt((p[0], p[1], 0.0)))

    size = sum(len(l) + 1 for l in loops)
    lines.append(f"CELLS {n_cells} {size}")
    for loop in loops:
        lines.append(" ".join(str(int(v)) for v in [len(loop), *loop]))
    lines.append(f"CELL_TYPES {n_cells}")
    lines.extend([str(VTK_POLYGON)] * n_cells)

    if cell_scalars or cell_vectors:
        lines.append(f"CELL_DATA {n_cells}")
    for name, values in (cell_scalars or {}).items():
        values = np.asarray(values, dtype=float).reshape(n_cells, -1)
        lines.append(f"SCALARS {name} double {values.shape[1]}")
        lines.append("LOOKUP_TABLE default")
        for row in values:
            lines.append(_fmt(row))
    for name, values in (cell_vectors or {}).items():
        values = np.asarray(values, dtype=float)
        lines.append(f"VECTORS {name} double")
        for row in values:
            lines.append(_fmt((row[0], row[1], 0.0)))

    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise ExportError(f"Cannot write VTK file {path}: {exc}") from exc


def read_polygon_vtk(path: str) -> Dict[str, object]:
    """
    Relecture minimale du format écrit ci-dessus (tests de cohérence).

    Returns:
        {"points": (n, 3), "cells": [loop, ...], "cell_data": {nom: array}}
    """
    try:
        tokens = Path(path).read_text().split("\n")
    except OSError as exc:
        raise ExportError(f"Cannot read VTK file {path}: {exc}") from exc

    out: Dict[str, object] = {"cell_data": {}}
    i = 4
    n_cells = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if not line:
            i += 1
            continue
        head = line.split()
        if head[0] == "POINTS":
            n = int(head[1])
            out["points"] = np.array([[float(x) for x in tokens[i + 1 + k].split()] for k in range(n)])
            i += n + 1
        elif head[0] == "CELLS":
            n_cells = int(head[1])
            out["cells"] = [np.array([int(x) for x in tokens[i + 1 + k].split()[1:]]) for k in range(n_cells)]
            i += n_cells + 1
        elif head[0] == "CELL_TYPES":
            i += int(head[1]) + 1
        elif head[0] == "CELL_DATA":
            i += 1
        elif head[0] == "SCALARS":
            rows = [[float(x) for x in tokens[i + 2 + k].split()] for k in range(n_cells)]
            out["cell_data"][head[1]] = np.array(rows)
            i += n_cells + 2
        elif head[0] == "VECTORS":
            rows = [[float(x) for x in tokens[i + 1 + k].split()] for k in range(n_cells)]
            out["cell_data"][head[1]] = np.array(rows)
            i += n_cells + 1
        else:
            raise ExportError(f"Unexpected VTK section '{head[0]}' in {path}")
    return out
