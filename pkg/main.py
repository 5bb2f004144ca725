"""
Point d'entrée CLI: étude de convergence VEM H(rot) pour un exemple.

Usage:
    python main.py --example circle --levels 3,4,5,6,7
    python main.py --config config/line_singular_s02.ini --fem
"""
import argparse
import sys
from typing import Any, Dict, List, Optional

from app.core.config import LOG_LEVEL
from app.core.exceptions import ConfigError
from app.core.logging import get_logger, setup_logging
from app.jobs_experiment import run_experiment
from app.models.experiment import build_config, load_config
from app.models.vem import StabScale

logger = get_logger(__name__)

# =============================================================================
# ARGUMENTS
# =============================================================================


def _levels(text: str) -> List[int]:
    """Liste de niveaux: "3,4,5" ou "3..7"."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list '{text}' (use '3,4,5' or '3..7')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Lowest-order H(rot) virtual elements on cut-cell meshes: convergence study",
        allow_abbrev=False,
    )
    parser.add_argument("--config", help="Experiment config file (INI sections)")
    parser.add_argument("--example", choices=["circle", "line_singular", "double_circle", "layers"],
                        help="Example to run")
    parser.add_argument("--levels", type=_levels, help="Levels k with h = 2^-k, e.g. '3,4,5' or '3..7'")
    parser.add_argument("--stab", choices=[s.value for s in StabScale],
                        help="Stabilization scaling (default: local-hk)")
    parser.add_argument("--quad-order", type=int, dest="quad_order", help="Triangle quadrature order")
    parser.add_argument("--theta", type=float, help="Solution regularity exponent for the mesh audit")
    parser.add_argument("--kappa0", type=float)
    parser.add_argument("--kappa1", type=float)
    parser.add_argument("--ref-level", type=int, dest="ref_level",
                        help="Reference level for self-convergence (default: 8)")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--fem", action="store_true", default=None,
                        help="Also solve with lowest-order Nedelec edge elements")
    parser.add_argument("--audit-only", action="store_true", default=None, dest="audit_only",
                        help="Build and audit meshes without solving")
    parser.add_argument("--s", type=float, help="Singularity exponent (line_singular)")
    parser.add_argument("--layers", type=int, choices=[2, 5], help="Number of layers (layers)")
    parser.add_argument("--omega", type=float, help="Angular frequency")
    parser.add_argument("--eps", type=float, help="Permittivity and source width")
    parser.add_argument("--log-level", default=LOG_LEVEL, dest="log_level",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    return parser


_OVERRIDES = (
    "example", "levels", "stab", "quad_order", "theta", "kappa0", "kappa1",
    "ref_level", "out", "fem", "audit_only", "s", "layers", "omega", "eps",
)


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}


# =============================================================================
# MAIN
# =============================================================================


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    overrides = overrides_from_args(args)
    try:
        if args.config:
            config = load_config(args.config, overrides)
        else:
            if "example" not in overrides:
                raise ConfigError("--example is required without --config", field="example")
            config = build_config(overrides)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}", exc_info=False, error_type="ConfigError")
        return 2

    result = run_experiment(config)
    if not result.ok:
        logger.warning(f"Experiment finished with failed levels: {result.failed_levels}", example=config.example)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
