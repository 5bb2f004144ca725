"""
Hiérarchie d'exceptions pour le solveur et le pipeline d'expériences.

Permet de distinguer:
- Erreurs géométriques (découpe, polygone invalide)
- Erreurs de maillage (topologie)
- Erreurs numériques (quadrature, factorisation, résidu)
- Erreurs de configuration / export
"""
from typing import Optional


class VemError(Exception):
    """Exception de base pour tout le pipeline."""

    def __init__(
        self,
        message: str,
        cell: Optional[int] = None,
        edge: Optional[int] = None,
        level: Optional[int] = None,
        recoverable: bool = False,
    ):
        self.cell = cell
        self.edge = edge
        self.level = level
        self.recoverable = recoverable
        super().__init__(message)

    def __str__(self) -> str:
        parts = [super().__str__()]
        if self.cell is not None:
            parts.append(f"cell={self.cell}")
        if self.edge is not None:
            parts.append(f"edge={self.edge}")
        if self.level is not None:
            parts.append(f"level={self.level}")
        return " | ".join(parts)


# =============================================================================
# ERREURS GÉOMÉTRIQUES
# =============================================================================

class GeometryError(VemError):
    """Entrée géométrique invalide."""
    pass


class InvalidPolygonError(GeometryError):
    """Polygone non simple, mal orienté ou d'aire nulle."""
    pass


class TangentCutError(GeometryError):
    """
    Primitive tangente à une cellule (un seul point d'intersection),
    ou qui entre et ressort par la même arête.

    Le niveau est enregistré en échec et le run continue; perturber n.
    """

    def __init__(self, message: str, **kwargs):
        super().__init__(message, recoverable=True, **kwargs)


# =============================================================================
# ERREURS DE MAILLAGE
# =============================================================================

class MeshError(VemError):
    """Erreur lors de la construction du maillage."""
    pass


class MeshTopologyError(MeshError):
    """Invariant topologique violé (arête orpheline, boucle non fermée...)."""
    pass


# =============================================================================
# ERREURS NUMÉRIQUES
# =============================================================================

class QuadratureError(VemError):
    """Échantillon non fini d'un champ ou d'une source."""

    def __init__(self, message: str, location: Optional[tuple] = None, **kwargs):
        self.location = location
        super().__init__(message, recoverable=True, **kwargs)

    def __str__(self) -> str:
        base = super().__str__()
        if self.location is not None:
            return f"{base} | at=({self.location[0]:.6g}, {self.location[1]:.6g})"
        return base


class SolverError(VemError):
    """Erreur lors de la résolution du système linéaire."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault("recoverable", True)
        super().__init__(message, **kwargs)


class SingularSystemError(SolverError):
    """
    Matrice numériquement singulière.

    Typiquement β coïncide avec une valeur propre discrète: changer ω ou le maillage.
    """
    pass


class ResidualError(SolverError):
    """Résidu relatif au-dessus de la tolérance après factorisation."""

    def __init__(self, message: str, residual: float, **kwargs):
        self.residual = residual
        super().__init__(message, **kwargs)


# =============================================================================
# ERREURS DE CONFIGURATION / EXPORT
# =============================================================================

class ConfigError(VemError):
    """Configuration d'expérience invalide."""

    def __init__(self, message: str, field: Optional[str] = None, **kwargs):
        self.field = field
        super().__init__(message, recoverable=False, **kwargs)


class ExportError(VemError):
    """Écriture d'un artefact impossible (chemin non inscriptible...)."""
    pass


# =============================================================================
# HELPERS
# =============================================================================

def is_recoverable(exc: Exception) -> bool:
    """Vérifie si le runner peut continuer après cette exception."""
    if isinstance(exc, VemError):
        return exc.recoverable
    # Erreurs numpy/scipy standard considérées récupérables (niveau suivant)
    if isinstance(exc, (ArithmeticError, MemoryError)):
        return True
    return False
