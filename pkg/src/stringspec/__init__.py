"""Density reconstruction for a vibrating string from Dirichlet eigenvalues.

The inverse problem is solved by fitting traces of shifted Chebyshev
polynomials of the operator A∘M_rho to the same traces formed from the
measured eigenvalues; synthetic data come from a Chebyshev collocation solver.
"""
from .errors import *  # noqa: F401,F403
from .forward import (
    CollocationConfig,
    Spectrum,
    add_noise,
    analytic_spectrum,
    cheb_grid_and_diff,
    solve_forward,
)
from .inversion import (
    InversionConfig,
    ReconstructionResult,
    condition_study,
    default_initial_guess,
    default_schedule,
    gauss_newton_step,
    invert,
    loglog_slope,
    multistep,
    reconstruct,
)
from .operator import (
    DIRICHLET,
    DIRICHLET_NEUMANN,
    BasisMatrix,
    BoundaryCondition,
    CustomBasis,
    Density,
    FourierCosine,
    ModelMatrix,
    assemble_basis_matrices,
    assemble_basis_matrix,
    assemble_model_matrix,
    eval_density,
    fourier_project,
    green_kernel,
)
from .presets import PiecewiseConstant, get_preset
from .traces import (
    TraceTargets,
    choose_scale,
    compute_trace_targets,
    estimate_L,
    model_traces_and_jacobian,
    power_traces,
    scaled_cheb_scalar,
)

__version__ = "0.1.0"
