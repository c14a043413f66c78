"""Tensor-train solver for the multicomponent Smoluchowski coagulation equation."""
from .coag import OperatorWorkspace, RankOverflowError, birth_term_L1, death_term_L2, trapezoid_convolution
from .correct import nonnegative_correct
from .cross import CrossConfig, CrossConvergenceWarning, CrossEvaluationError, CrossInfo, maxvol, tt_cross_approximate
from .integrator import Diagnostics, SolverConfig, SolverError, relative_error_vs_analytic, rhs, solve, step
from .kernels import (
    KernelTT,
    analytic_constant_2d,
    analytic_grid_2d,
    analytic_total_density,
    ballistic_kernel_value,
    bessel_i0,
    bessel_i0e,
    build_ballistic_kernel,
    build_constant_kernel,
    build_kernel,
    build_zero_kernel,
    exponential_rank_one,
    moment_density,
    moment_mass,
)
from .optim import Extrema, OptimConfig, ScanLimitError, dense_scan_extrema, tt_extrema, tt_max, tt_min_abs
from .tt import (
    Grid,
    TTTensor,
    tt_add,
    tt_const,
    tt_dot,
    tt_eval,
    tt_eval_many,
    tt_from_rank_one,
    tt_full,
    tt_hadamard,
    tt_norm,
    tt_ones,
    tt_round,
    tt_scale,
    tt_zeros,
)

__version__ = "0.1.0"
