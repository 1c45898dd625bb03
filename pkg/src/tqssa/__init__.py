"""Full and slow-manifold-reduced models of coupled Michaelis-Menten networks."""

from .fullsim import (FullState, IntegratorConfig, TrajectoryTable, conserved_totals,
                      full_rhs, integrate_full)
from .integrate import IntegrationError
from .matops import ConvergenceError, SingularMatrixError, Spectrum
from .netmodel import (Diagnostic, NetworkSpec, ParseError, bundled_path, load_network,
                       masks, parse_network, validate_network)
from .reduction import (ComplexSolution, ProjectionError, ReducedModel, complex_jacobian,
                        integrate_reduced, isolated_mm_reduced, mass_matrix,
                        project_initial, reduced_rhs, solve_complexes)
from .validity import (ComparisonSummary, ScalingFactors, ValidityReport,
                       compare_trajectories, epsilon_report, lemma_a1_bound,
                       omega_invariance_check, scaling_factors, slow_manifold_jacobian)

__all__ = [
    "ComparisonSummary", "ComplexSolution", "ConvergenceError", "Diagnostic", "FullState",
    "IntegrationError", "IntegratorConfig", "NetworkSpec", "ParseError", "ProjectionError",
    "ReducedModel", "ScalingFactors", "SingularMatrixError", "Spectrum", "TrajectoryTable",
    "ValidityReport", "bundled_path", "compare_trajectories", "complex_jacobian",
    "conserved_totals", "epsilon_report", "full_rhs", "integrate_full", "integrate_reduced",
    "isolated_mm_reduced", "lemma_a1_bound", "load_network", "masks", "mass_matrix",
    "omega_invariance_check", "parse_network", "project_initial", "reduced_rhs",
    "scaling_factors", "slow_manifold_jacobian", "solve_complexes", "validate_network",
]
