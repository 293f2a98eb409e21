"""Linear hybridizable discontinuous Galerkin (HDG) method for the Helmholtz
equation -div grad u - k^2 u = f with impedance boundary condition
du/dn + i k u = g, using the first-order form q = -grad u.

Main entry points: :func:`solve_hdg`, :func:`relative_errors`,
:func:`postprocess_all`, the dispersion tools in :mod:`.dispersion` and the
study drivers in :mod:`.studies`.
"""
from .bessel import bessel_j
from .dispersion import (
    Dispersion1D, Dispersion2D, bloch_matrix_2d, discrete_wavenumber_1d, discrete_wavenumber_2d,
    dispersion_2d, phase_error_curve_1d, phase_error_curve_2d, stencil_1d, tau_opt_1d,
)
from .exact import ExactSolution, bessel_solution_2d, plane_wave_1d
from .forms import energy_norm_sq, evaluate_A, evaluate_F, magic_formula
from .hdg import (
    ElementSingularError, HDGSolution, HDGSolveError, TraceSystem, assemble_element,
    assemble_trace_system, flux_jump, numerical_flux, solve_hdg,
)
from .linalg import SingularMatrixError, SparseSolverError, dense_solve, sparse_solve
from .mesh import (
    Mesh1D, MeshError, MeshTopologyError, SimplexMesh, TriMesh, build_hexagon_equilateral,
    build_uniform_1d, dump_mesh, extract_edges, load_mesh,
)
from .penalty import (
    CORRECTED_1D, CORRECTED_2D, IMAG_K, IMAG_OVER_H, REAL_K, TAU_OPT_1D, InvalidPenaltyError,
    PenaltyRule, eval_penalty,
)
from .postprocess import PostprocessedField, PostprocessSingularError, postprocess_all, postprocess_element
from .projections import (
    ErrorReport, ProjectionPair, edge_l2_projection, hdg_projection, relative_errors,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
