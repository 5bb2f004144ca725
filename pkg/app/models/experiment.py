"""
Configuration d'une expérience (un exemple, une suite de niveaux h = 2^-k).

Fichier de config: sections INI, une clé par ligne.

    [experiment]   example, levels (liste "3, 4, 5"), ref_level, out
    [solver]       stab (local-hk | global-h), quad_order, fem, audit_only
    [regularity]   theta, kappa0, kappa1
    [problem]      s, layers, omega, eps, line_offset,
                   alpha_plus, alpha_minus, beta_plus, beta_minus,
                   sigma_plus, sigma_minus

Les clés absentes prennent leur valeur par défaut; une valeur vide vaut None.
"""
import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from app.core.config import OUTPUT_DIR, QUAD_ORDER
from app.core.exceptions import ConfigError
from app.models.regularity import RegularityParams
from app.models.vem import StabScale

ExampleId = Literal["circle", "line_singular", "double_circle", "layers"]

DEFAULT_REF_LEVEL = 8

_SECTIONS = {
    "experiment": ("example", "levels", "ref_level", "out"),
    "solver": ("stab", "quad_order", "fem", "audit_only"),
    "regularity": ("theta", "kappa0", "kappa1"),
    "problem": (
        "s", "layers", "omega", "eps", "line_offset",
        "alpha_plus", "alpha_minus", "beta_plus", "beta_minus",
        "sigma_plus", "sigma_minus",
    ),
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    example: ExampleId
    levels: List[int] = [3, 4, 5, 6, 7]
    ref_level: Optional[int] = None
    out: str = OUTPUT_DIR

    stab: StabScale = StabScale.LOCAL_HK
    quad_order: int = QUAD_ORDER
    fem: bool = False
    audit_only: bool = False

    theta: float = 0.9
    kappa0: float = -1.0
    kappa1: float = 60.0

    # Paramètres des problèmes (None: valeur par défaut du problème)
    s: Optional[float] = None
    layers: Optional[int] = None
    omega: Optional[float] = None
    eps: Optional[float] = None
    line_offset: Optional[float] = None
    alpha_plus: Optional[float] = None
    alpha_minus: Optional[float] = None
    beta_plus: Optional[float] = None
    beta_minus: Optional[float] = None
    sigma_plus: Optional[float] = None
    sigma_minus: Optional[float] = None

    @field_validator("levels")
    @classmethod
    def _levels_ascending(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one level is required")
        if any(k < 1 for k in v):
            raise ValueError(f"levels must be >= 1 (h = 2^-k with n >= 2), got {v}")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"levels must be strictly ascending, got {v}")
        return v

    @field_validator("quad_order")
    @classmethod
    def _quad_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"quad_order must be >= 1, got {v}")
        return v

    @model_validator(mode="after")
    def _check_reference(self) -> "ExperimentConfig":
        if self.ref_level is not None and self.ref_level <= max(self.levels):
            raise ValueError(
                f"ref_level ({self.ref_level}) must exceed the finest compared level ({max(self.levels)})"
            )
        RegularityParams(theta=self.theta, kappa0=self.kappa0, kappa1=self.kappa1)
        return self

    @property
    def regularity(self) -> RegularityParams:
        return RegularityParams(theta=self.theta, kappa0=self.kappa0, kappa1=self.kappa1)

    def reference_level(self) -> int:
        return self.ref_level if self.ref_level is not None else max(DEFAULT_REF_LEVEL, max(self.levels) + 1)

    def problem_params(self) -> Dict[str, Any]:
        """Paramètres transmis au constructeur du problème (clés non nulles)."""
        names = {
            "circle": ("alpha_plus", "alpha_minus", "beta_plus", "beta_minus"),
            "line_singular": ("s", "beta_plus", "beta_minus"),
            "double_circle": ("omega", "eps", "sigma_plus", "sigma_minus"),
            "layers": ("layers", "omega", "eps", "sigma_plus", "sigma_minus"),
        }[self.example]
        params = {k: getattr(self, k) for k in names if getattr(self, k) is not None}
        if self.example == "line_singular" and self.line_offset is not None:
            params["offset"] = self.line_offset
        return params


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, StabScale):
        return value.value
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: ExperimentConfig, path: str) -> None:
    parser = configparser.ConfigParser()
    data = config.model_dump()
    data["stab"] = config.stab
    for section, keys in _SECTIONS.items():
        parser[section] = {k: _format(data[k]) for k in keys}
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w") as fh:
        parser.write(fh)


def parse_config(text: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"Malformed config file: {exc}") from exc

    raw: Dict[str, Any] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"Unknown config section [{section}]", field=section)
        for key, value in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"Unknown key '{key}' in [{section}]", field=key)
            value = value.strip()
            if value == "":
                continue
            if key == "levels":
                try:
                    raw[key] = [int(v) for v in value.replace(",", " ").split()]
                except ValueError as exc:
                    raise ConfigError(f"Invalid levels '{value}': {exc}", field="levels") from exc
            else:
                raw[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    try:
        return ExperimentConfig(**raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first.get("loc", ())) or None
        raise ConfigError(f"Invalid experiment config: {first.get('msg')}", field=loc) from exc
    except ValueError as exc:
        raise ConfigError(f"Invalid experiment config: {exc}") from exc


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}", field="config") from exc
    return parse_config(text, overrides)


def build_config(overrides: Dict[str, Any]) -> ExperimentConfig:
    """Config sans fichier (flags CLI uniquement)."""
    return parse_config("", overrides)


# =============================================================================
# RÉSULTATS
# =============================================================================

@dataclass
class LevelResult:
    """Résultat d'un niveau h = 2^-k (erreurs NaN si non calculées)."""
    level: int
    h: float
    ok: bool = False
    n_cells: int = 0
    n_dofs: int = 0
    l2_err: float = float("nan")
    rot_err: float = float("nan")
    residual: Optional[float] = None
    duration_ms: float = 0.0
    g1_ok: Optional[bool] = None
    worst_rho_ratio: Optional[float] = None
    interface_gap: Optional[float] = None
    fem_l2_err: Optional[float] = None
    fem_rot_err: Optional[float] = None
    fem_rel_diff: Optional[float] = None
    error: Optional[str] = None
    error_type: Optional[str] = None


@dataclass
class ExperimentResult:
    example: str
    run_id: str
    reference_level: Optional[int] = None
    levels: List[LevelResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.levels) and all(r.ok for r in self.levels)

    @property
    def failed_levels(self) -> List[int]:
        return [r.level for r in self.levels if not r.ok]
