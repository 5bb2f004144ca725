from app.models.geometry import Circle, InterfaceSpec, Line, Point2, Polygon, PolygonMetrics, Region
from app.models.mesh import CellMetrics, DofMap, GridSpec, PolyMesh
from app.models.nedelec import Nd0Solution, TriMesh
from app.models.postproc import ConvergenceRow, ConvergenceTable, ErrorReport
from app.models.regularity import RegularityParams, RegularityReport
from app.models.system import LinearSystem, SolveReport
from app.models.vem import CoefficientField, ElementOperators, StabScale

__all__ = [
    'Circle', 'InterfaceSpec', 'Line', 'Point2', 'Polygon', 'PolygonMetrics', 'Region',
    'CellMetrics', 'DofMap', 'GridSpec', 'PolyMesh',
    'Nd0Solution', 'TriMesh',
    'ConvergenceRow', 'ConvergenceTable', 'ErrorReport',
    'RegularityParams', 'RegularityReport',
    'LinearSystem', 'SolveReport',
    'CoefficientField', 'ElementOperators', 'StabScale',
]
