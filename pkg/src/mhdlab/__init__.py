"""mhdlab: a numerical laboratory for the MHD boundary-layer system.

Tangentially spectral, normally finite-difference discretization of the
degenerate parabolic system for (u, f) on a periodic-by-truncated half
plane, with IMEX time stepping, the auxiliary-field apparatus
(U, lambda, delta, psi_m), Gevrey seminorm machinery, and numerical
verification of the cancellation identities.
"""

from .grid import (
    DomainConfig,
    Field,
    Grid,
    ddx_spectral,
    ddy_spectral,
    ddz_fd,
    d2dz2_fd,
    dealias,
    inner_product,
    inner_product_weighted,
    integrate_z_cumulative,
    l2_norm,
    multiply,
    weighted_norm,
)
from .state import (
    IncompatibleDataError,
    NonlinearFields,
    State,
    apply_boundary_conditions,
    initial_time_derivative,
    nonlinear_xi_eta,
    reconstruct_normal,
    state_from_tangential,
    validate_compatibility,
    zero_state,
)
from .solver import (
    CFLError,
    DecayingShearExact,
    MMSReport,
    NumericsError,
    SolverConfig,
    Trajectory,
    imex_step,
    manufactured_forcing_residual,
    rhs_regularized,
    run_trajectory,
)
from .auxiliary import (
    AuxState,
    advance_U,
    compute_lambda_delta,
    initial_aux,
    psi_m_residual,
    u_equation_residual,
)
from .gevrey import (
    GevreyParams,
    NormReport,
    RadiusEstimate,
    composite_norm_a,
    estimate_radius,
    seminorm_X,
    write_norm_csv,
)
from .diagnostics import (
    DiagnosticReport,
    apriori_monitor,
    cancellation_inner_product,
    energy_balance_report,
    h_equation_residual,
    write_diagnostic_csv,
    xi_eta_equation_residual,
)
from .recipes import InitialRecipe

__version__ = "0.1.0"
