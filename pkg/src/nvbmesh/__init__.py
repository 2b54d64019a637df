"""Graded triangulations by newest-vertex bisection for point singularities.

The package builds meshes whose element sizes shrink dyadically toward a set
of singular points, equidistributing the H1-seminorm Lagrange-interpolation
error, and provides the measurement tools (quadrature, interpolation, ring
statistics, convergence sweeps) to verify the optimal error-decay rate
#T**(-p/d) experimentally.
"""

__version__ = "0.1.0"

from .analysis import (
    ErrorReport,
    equidistribution_stats,
    h1_error,
    h1_seminorm,
    ring_decomposition,
    ring_index,
)
from .exceptions import (
    AnalysisError,
    ConfigError,
    GradingError,
    KelloggError,
    MeshError,
    MeshFormatError,
    NvbMeshError,
    SingularityError,
)
from .formats import mesh_from_text, mesh_to_text, mesh_to_vtk, read_mesh, write_mesh, write_vtk
from .grading import (
    ComplexityLedger,
    GradingParams,
    bdd_ledger_check,
    compute_K,
    element_distance,
    first_loop,
    grade_mesh,
    second_loop,
    verify_first_loop,
    verify_marked_bound,
    verify_size_lemma,
)
from .kellogg import KelloggSolution, kellogg_mu, kellogg_solve, kellogg_term
from .lagrange import global_nodes, interpolate
from .mesh import Mesh, Triangle, Vertex, initial_mesh, sector_fan_mesh
from .quadrature import TriangleRule, triangle_rule
from .singular import (
    Cutoff,
    SingularTerm,
    SinAngular,
    SumFunction,
    bound_check,
    preset_poisson_corner,
)
from .sweeps import convergence_sweep, fit_slope, uniform_sweep

__all__ = [
    "__version__",
    "Mesh", "Triangle", "Vertex", "initial_mesh", "sector_fan_mesh",
    "mesh_to_text", "mesh_from_text", "write_mesh", "read_mesh", "mesh_to_vtk", "write_vtk",
    "GradingParams", "ComplexityLedger", "compute_K", "element_distance",
    "first_loop", "second_loop", "grade_mesh",
    "verify_size_lemma", "verify_first_loop", "verify_marked_bound", "bdd_ledger_check",
    "SingularTerm", "SinAngular", "Cutoff", "SumFunction", "preset_poisson_corner", "bound_check",
    "KelloggSolution", "kellogg_solve", "kellogg_mu", "kellogg_term",
    "TriangleRule", "triangle_rule", "global_nodes", "interpolate",
    "ErrorReport", "h1_error", "h1_seminorm", "ring_index", "ring_decomposition",
    "equidistribution_stats",
    "convergence_sweep", "uniform_sweep", "fit_slope",
    "NvbMeshError", "MeshError", "MeshFormatError", "GradingError", "KelloggError",
    "SingularityError", "AnalysisError", "ConfigError",
]
