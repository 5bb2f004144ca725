"""Utilitaires de test: domaine carré, interfaces droites, champs constants."""
import numpy as np

from app.models.geometry import InterfaceSpec, Line

SQUARE = (-1.0, 1.0, -1.0, 1.0)


def line_interface(x0: float) -> InterfaceSpec:
    """Ω⁻ = {x > x0}."""
    return InterfaceSpec(primitives=(Line(point=(x0, 0.0), normal=(-1.0, 0.0)),), minus_clauses=((0,),))


def constant_field(c):
    c = np.asarray(c, dtype=complex)

    def field(points, tags):
        return np.tile(c, (points.shape[0], 1))

    return field
