"""Total-variation recovery of gradient-sparse signals from Gaussian measurements."""

from .core import (MeasurementEnsemble, NullBasis, SeedSpec, derive_seed, gaussian_matrix,
                   min_singular_value, null_space_basis, sparse_gradient_image,
                   sparse_gradient_signal)
from .operators import (diff_1d, diff_adjoint, diff_nd, ksum_largest, relaxed_null_margin,
                        relaxed_null_sets, restrict, tv_norm)
from .haar import haar_decompose_1d, haar_decompose_nd, haar_reconstruct_1d, haar_reconstruct_nd
from .solvers import (SolveReport, SolverConfig, StabilityInputs, lp_oracle_tv_min,
                      stability_bound, tv_min_eq, tv_min_noise)
from .certificates import (almost_euclidean_beta, balanced_condition, null_space_condition,
                           partial_tv_sup, tv_small_prob)
from .widths import (lower_bound_construction, lower_bound_mc, measurement_lower_bound,
                     required_measurements, width_lower_bound_1d, width_mc,
                     width_upper_bound_1d, width_upper_bound_nd)
from .experiments import ExperimentConfig, PhaseDiagram, export, find_m50, run_phase_transition
from . import errors

__version__ = "0.1.0"
