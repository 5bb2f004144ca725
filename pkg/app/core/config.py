import os

OUTPUT_DIR = os.getenv("VEM_OUTPUT_DIR", "results")
LOG_LEVEL = os.getenv("VEM_LOG_LEVEL", "INFO")

# Tolérances géométriques (relatives à h_K sauf DEDUP_TOL, absolue)
SNAP_TOL = float(os.getenv("VEM_SNAP_TOL", "1e-9"))
DEDUP_TOL = 1e-12
DEGENERATE_AREA_RATIO = 1e-14

# Solveur et quadrature
RESIDUAL_TOL = float(os.getenv("VEM_RESIDUAL_TOL", "1e-8"))
HELMHOLTZ_TOL = float(os.getenv("VEM_HELMHOLTZ_TOL", "1e-8"))
QUAD_ORDER = int(os.getenv("VEM_QUAD_ORDER", "7"))
MAX_ADAPT_DEPTH = int(os.getenv("VEM_MAX_ADAPT_DEPTH", "8"))

# Subdivision géométrique vers une ligne singulière
GRADING_RATIO = 0.25
GRADING_LEVELS = 20
GRADED_ORDER = 15
