"""First Dirichlet p-Laplace eigenpairs on intervals, planar domains, and
quadrilateral surface meshes, for 2 <= p up to ~100."""

from .eigensolver import (
    ContinuationRun,
    EigenResult,
    SolverConfig,
    continuation,
    continuation_with_rescaling,
    line_search,
    newton_solve_fixed_p,
    p2_initialize,
)
from .fem import (
    FeFunction,
    QuadratureRule,
    assemble_newton_system,
    gamma_coefficient,
    normalize_sup,
    rayleigh_directional_derivative,
    rayleigh_quotient,
    sup_norm,
    surface_area,
    tangential_gradient,
)
from .mesh import (
    Mesh,
    approx_max_boundary_distance,
    build_disk_mesh,
    build_half_torus_mesh,
    build_hemisphere_mesh,
    build_interval_mesh,
    build_square_mesh,
    mesh_size,
    read_mesh,
    scale_mesh,
    write_mesh,
)
from .reference import (
    PTrigTable,
    cusp_model,
    exact_1d_eigenpair,
    lambda_expansion,
    lambda_root_expansion,
    limit_distance_function,
    pi_p,
    sin_p,
)
from .sparse import CgReport, CsrMatrix, cg_solve, make_preconditioner, smallest_generalized_eigenpair

__version__ = "0.1.0"
