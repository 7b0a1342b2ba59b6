"""Dressing-method solvers for N-wave type and multidimensional NLS systems.

Modules:

- :mod:`dressing_lab.core`     model data, grids, matrix fields, FD stencils, stepping
- :mod:`dressing_lab.kernels`  closed-form dressing functions and the Dirac-comb solver
- :mod:`dressing_lab.nwave`    spectral-family and phi-representation evolvers
- :mod:`dressing_lab.nls`      the NLS-variant spectral family evolver
- :mod:`dressing_lab.oracles`  direct integrators and residuals
- :mod:`dressing_lab.config`, :mod:`dressing_lab.fieldio`, :mod:`dressing_lab.runner`,
  :mod:`dressing_lab.cli`  configs, field dumps, runs and manifests
"""

from .core import (
    ModelSpec,
    SpatialGrid,
    SpectralFamily,
    ResidualReport,
    ValidationReport,
    Violation,
    build_grid,
    default_dt,
    fd_partial,
    fd_second,
    laplacian,
    offdiag,
    solve_couplings,
    step,
    validate_model,
)
from .errors import *  # noqa: F401,F403
from .kernels import (
    DegenerateKernelSpec,
    eval_C,
    eval_phi1,
    eval_psi_continuum,
    reconstruct_u_classical,
    solve_degenerate_U,
)
from .nls import NlsState, classical_ds_diagnostics, evolve_nls, nls_rhs
from .nwave import (
    NwaveState,
    PhiState,
    evolve_nwave,
    fhat_from_phi,
    make_phi_state,
    nwave_rhs,
    phi_time_derivative,
    reconstruct_u,
    taylor_step_phi,
    u_from_phi,
    uhat_from_phi,
)
from .oracles import convergence_order, integrate_direct, residual

__version__ = "0.1.0"
