"""Normalized ground states of a coupled Schrodinger system with a mixed
(second-order in x, fractional in y) operator, on a periodic spectral grid."""

from .functionals import (
    CoercivityConstants,
    FiberIntegrals,
    ModelParams,
    StatePair,
    coercivity_constants,
    delta_lower_bound,
    energy,
    fiber_derivative,
    fiber_integrals,
    fiber_second,
    fiber_value,
    gradient,
    pohozaev,
    pohozaev_time,
    project_state,
)
from .grid import (
    Field,
    Grid,
    apply_mixed_operator,
    default_base_grid,
    fiber_resample,
    kinetic,
    lp_integral,
    make_grid,
    mass,
    resample_two_factor,
)
from .options import SolverOptions
from .rearrangement import double_steiner, steiner_x, steiner_y, symmetrize_and_project
from .scalar import (
    GNConstants,
    ScalarGroundState,
    ScaledSolution,
    beta_threshold,
    gn_constants,
    mass_threshold,
    scalar_fiber_time,
    scalar_level,
    scaled_solution,
    solve_scalar_base,
)
from .system import (
    PathScan,
    SolveReport,
    fiber_path_scan,
    lagrange_multipliers,
    solve_system,
    verify_ground_state,
)

__version__ = "0.1.0"
