"""Finite and radial balayage-space toolkit for semilinear equations ``u + K^phi u = h``."""

from .errors import (BalayageError, InternalConsistencyError, InvalidInputError,
                     NonConvergenceError, NotTransientError, NumericalFailureError,
                     VerificationFailure)
from .markov_core import (PoissonSemigroupEval, StateFunction, StateSpace, SubMarkovKernel,
                          is_balayage_space, is_supermedian, is_transient, poisson_apply,
                          potential_kernel)
from .nonlinearity import Nonlinearity, truncate_phi
from .potential_ops import (SubsetMask, WeightedPotentialKernel, domination_check,
                            harmonic_kernel, hunt_formula_check, killed_green,
                            killed_potential_kernel, mc_exit_estimate, reduced_function)
from .semilinear import (Exhaustion, SemilinearProblem, SolveReport, P_phi, T_phi,
                         solve_fixed, harmonic_minorant_search, thin_set_condition,
                         verify_identity_suite)

__version__ = "0.1.0"
