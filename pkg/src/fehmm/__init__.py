"""Fully discrete heterogeneous multiscale solver for 1D parabolic problems
with locally periodic space-time coefficients."""

from .analysis import (
    ConvergenceReport,
    ErrorRecord,
    corrector_diagnostic,
    ehmm_estimate,
    errors_vs_exact,
    fit_rate,
    triple_norm,
)
from .expressions import (
    MultiscaleCoefficient,
    check_bounds,
    evaluate,
    harmonic_mean_1d,
    parse,
)
from .fem import (
    BandedMatrix,
    FeFunction,
    FeSpace,
    Mesh1D,
    assemble_mass,
    assemble_stiffness,
    l2_project,
    norms,
    solve_banded,
)
from .fine import FineConfig, compare_hmm_vs_fine, run_fine
from .macro import (
    CoefficientMode,
    MacroConfig,
    MacroTrajectory,
    MicroParams,
    OracleParams,
    assemble_B,
    run_hmm,
    step,
)
from .micro import (
    CellConfig,
    CellSolution,
    HomogenizedValue,
    assemble_Ahh,
    rescaled_cell_check,
    solve_cell,
)
from .oracle import a0_oracle_periodic, oracle_corrector

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
