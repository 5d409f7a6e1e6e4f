"""Matrix-valued noncommutative probability: partition combinatorics,
moment/cumulant transforms in four species, truncated H/F/R series,
upper-half-plane evolution flows, and triangular-array limit experiments."""

from .errors import (DimensionMismatchError, FlowDivergenceError,
                     NumericalFailure, SizeCapError,
                     UnsupportedStructureError, ValidationFailure)
from .partitions import (NestingForest, Partition, enumerate_partitions,
                         nesting_forest, order_count, order_count_bruteforce)
from .matalg import (HalfPlanePoint, amplify, as_cmatrix, imag_part,
                     in_stolz_angle, in_upper_half_plane, is_hermitian,
                     is_positive_definite, load_matrix, matrix_from_json,
                     matrix_to_json, min_eig_hermitian, op_norm, real_part)
from .dist import (MomentTensor, RealizedCP, RealizedDistribution, cp_check,
                   eval_multilinear, hermitian_symmetry_defect, load_model,
                   model_from_json, moments_of, random_cp, random_hermitian,
                   random_realized, scalar_atoms, sigma_basis_tensor,
                   sigma_eval, tensor_from_json, tensor_to_json)
from .cumulants import (BOOLEAN, CLASSICAL, FREE, MONOTONE, SPECIES,
                        CumulantTensor, Species, convolve,
                        cumulants_to_moments, k_pi_eval, make_nu,
                        moments_to_cumulants, nu_cumulants, power_eta,
                        species_by_name)
from .ncseries import (NCSeries, compose, evolution_check, f_series,
                       h_series, monotone_convolve, series_to_moments,
                       voiculescu_series)
from .flow import (FlowState, Generator, cauchy_G, divisor_convergence_check,
                   flow_vs_series, generator_perturbation_check,
                   h_sigma_evaluator, lambda_r_value, phi_eval, picard_flow,
                   recover_sigma, rk4_flow, truncation_tail_bound)
from .limits import (ConvergenceReport, TriangularArray, convolution_power,
                     default_schedule, order_distance, run_bp, run_scalar_bp)
from ._kernels import active_backend

__version__ = "0.1.0"
