from app.services.mesh_service import build_cut_mesh, dof_map
from app.services.system_service import assemble, set_tangential_bc, solve
from app.services.postproc_service import compute_errors, cross_compare, order_table

__all__ = [
    "build_cut_mesh",
    "dof_map",
    "assemble",
    "set_tangential_bc",
    "solve",
    "compute_errors",
    "cross_compare",
    "order_table",
]
