"""Nonlinear thermodynamic quantum master equation toolkit."""
from .kernels import BACKEND as KERNEL_BACKEND
from .master import BathState, SystemSpec, bracket_coefficients, rhs_caldeira_leggett, rhs_linearized, rhs_thermodynamic
from .operators import (
    SpectralDecomposition,
    anticommutator,
    canonical_correlation,
    canonical_state,
    commutator,
    conditional_operator,
    log_weight_factor,
    nonlinear_part,
    operator_log,
    spectral_decompose,
)
from .solvers import SolverConfig, Trajectory, evolve, step_direct, step_eigensystem

__version__ = "0.1.0"
