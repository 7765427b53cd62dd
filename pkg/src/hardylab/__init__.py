"""Two-weight Hardy inequalities and the Galerkin scheme for the weighted p-Laplacian heat flow."""

from .discretization import (Basis, DomainError, Mesh, QuadratureRule, RadialDomain, RawBasis, build_basis,
                             build_mesh, eval_field, gauss_rule, hat_basis, integrate, orthonormalize)
from .weights import (AdmissibilityReport, SuperharmonicProfile, WeightPair, check_bp, check_h_alpha,
                      check_h_infinity, derive_weights_from_profile, estimate_sigma0, hardy_constant,
                      make_confining_weights, make_power_weights, make_superharmonic_weights)
from .hardy import DiscConfig, OptConfig, RayleighReport, estimate_best_constant, rayleigh_quotient, verify_inequality
from .galerkin import (EnergyTrace, ProblemSpec, SolverState, TimeConfig, apriori_check, energy_residual,
                       hemicontinuity_probe, monotonicity_probe, project_initial, rhs, solve, step)

__version__ = "0.1.0"
