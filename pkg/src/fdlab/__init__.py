"""Numerical laboratory for fast diffusion at the critical exponent.

The package studies the radial rescaled fast-diffusion flow whose
stationary states are the explicit power-law profiles, with emphasis on
the critical exponent where the linearized operator loses its spectral
gap: relaxation slows from exponential to a square-root power law, the
linearization is heat flow on a cigar-type manifold, and the matching
functional inequalities (entropy sandwich, Fisher comparison,
Gagliardo-Nirenberg, log-corrected Hardy) can all be exercised
numerically.

Modules:
  profiles              exponents, stationary profiles, sandwich bounds
  radial_grid           graded radial mesh, weighted quadrature and forms
  fp_solver             well-balanced implicit solver for the nonlinear flow
  entropy_functionals   entropies, dissipations, and their comparison checks
  linear_flow           linearized (heat) flow, kernel probes, spectra
  cigar_geometry        curvature and isometric embedding of the cigar metric
  inequality_lab        trial-family experiments on the inequalities
  rate_analysis         decay-law fitting, model selection, good times
  harness               config-driven command line runner
"""

from .profiles import (
    BarenblattProfile,
    DiffusionParams,
    SandwichBounds,
    critical_exponent,
    eval_profile,
    extinction_exponent,
    make_params,
    make_profile,
    make_sandwich,
)
from .radial_grid import (
    RadialField,
    RadialGrid,
    build_grid,
    make_field,
    weight_values,
    weighted_gradient_form,
    weighted_integral,
)
from .fp_solver import (
    FlowSnapshot,
    InitialDataSpec,
    benilan_crandall_check,
    benilan_crandall_constant,
    make_initial_data,
    run,
    step,
)
from .entropy_functionals import (
    FunctionalBundle,
    check_entropy_sandwich,
    check_fisher_comparison,
    check_lp_entropy_bound,
    dissipation_residual,
    evaluate_bundle,
    fisher_comparison_constants,
    fisher_evolution_check,
)
from .linear_flow import (
    OperatorDiscretization,
    assemble,
    evolve,
    gap_sweep,
    heat_kernel_probe,
    linear_entropy_decay,
    spectrum,
)
from .cigar_geometry import (
    cigar_embedding,
    curvature_table,
    embedding_isometry_residual,
    geodesic_ball_volume,
    geodesic_distance,
    ricci,
    trace_identity_check,
)
from .inequality_lab import (
    TrialFamily,
    gn_check,
    hardy_failure_demo,
    log_hardy_check,
    log_hardy_constant,
    log_sobolev_calibrate,
    realize_trials,
)
from .rate_analysis import (
    FlowTimeSeries,
    calibrate_good_times_constant,
    fit_loglog,
    good_times_report,
    mode_comparison,
    select_model,
)

__version__ = "1.0.0"

__all__ = [
    "BarenblattProfile",
    "DiffusionParams",
    "SandwichBounds",
    "critical_exponent",
    "eval_profile",
    "extinction_exponent",
    "make_params",
    "make_profile",
    "make_sandwich",
    "RadialField",
    "RadialGrid",
    "build_grid",
    "make_field",
    "weight_values",
    "weighted_gradient_form",
    "weighted_integral",
    "FlowSnapshot",
    "InitialDataSpec",
    "benilan_crandall_check",
    "benilan_crandall_constant",
    "make_initial_data",
    "run",
    "step",
    "FunctionalBundle",
    "check_entropy_sandwich",
    "check_fisher_comparison",
    "check_lp_entropy_bound",
    "dissipation_residual",
    "evaluate_bundle",
    "fisher_comparison_constants",
    "fisher_evolution_check",
    "OperatorDiscretization",
    "assemble",
    "evolve",
    "gap_sweep",
    "heat_kernel_probe",
    "linear_entropy_decay",
    "spectrum",
    "cigar_embedding",
    "curvature_table",
    "embedding_isometry_residual",
    "geodesic_ball_volume",
    "geodesic_distance",
    "ricci",
    "trace_identity_check",
    "TrialFamily",
    "gn_check",
    "hardy_failure_demo",
    "log_hardy_check",
    "log_hardy_constant",
    "log_sobolev_calibrate",
    "realize_trials",
    "FlowTimeSeries",
    "calibrate_good_times_constant",
    "fit_loglog",
    "good_times_report",
    "mode_comparison",
    "select_model",
    "__version__",
]
