"""Entropy-balance phase-field system with thermal memory on a 1D interval.

The package integrates the coupled temperature/phase system whose heat flux
carries a convolution memory term, integrates its memory-free limit with
the combined diffusivity, and measures how fast the two approach each other
as the kernel concentrates at the origin.
"""

__version__ = "0.1.0"

from . import backend
from .errors import ConfigError, NumericsError, PositivityFailure, StepFailure
from .grid import (
    BoundaryTrace,
    ConstantInTime,
    Field,
    LinearInTime,
    Mesh1D,
    SinusoidalInTime,
    harmonic_extension,
    inner_H,
    laplacian_dirichlet,
    laplacian_neumann,
    norm_H,
    norm_V,
)
from .kernels import (
    ExponentialKernel,
    ExponentialMemory,
    FullHistoryMemory,
    KernelReport,
    NoMemory,
    TabulatedKernel,
    ZeroKernel,
    advance_exponential_memory,
    check_positive_type_sufficient,
    convolve_history,
    cumulative_kernel,
    estimate_coercivity_constant,
    eval_kernel,
    kernel_report,
    l1_deviation,
    l1_norm,
)
from .limitstudy import (
    ErrorFunctional,
    RateReport,
    RateRow,
    SweepPlan,
    compute_error_functional,
    fit_rate,
    run_sweep,
    sweep_flags,
)
from .nonlinear import (
    BoxIndicatorGraph,
    OddPolynomialGraph,
    SmoothNonlinearity,
    ZeroGraph,
    beta_hat_value,
    psi_value,
    resolvent,
    solve_scalar_log,
    yosida,
)
from .solver import (
    NewtonSettings,
    ProblemConfig,
    ResidualReport,
    SeparableSource,
    TabulatedSource,
    TrajectorySolution,
    ZeroSource,
    energy_identity_terms,
    entropy_residual,
    limit_config,
    run,
    step_phase,
    step_temperature,
    validate_config,
)
