"""Curvature-dimension test bench for diffusion semigroups on model spaces."""

from .model_space import ModelSpace, PotentialSpec, SpaceSpec, build_model_space
from .generator import (
    CurvaturePair,
    Generator,
    analytic_K,
    assemble_generator,
    cd_margin,
    estimate_K,
)
from .semigroup import (
    SemigroupCache,
    apply_semigroup,
    heat_kernel,
    heat_kernel_matrix,
    spectral_decompose,
    spectral_gap,
    sphere_kernel_series,
)
from .coefficients import (
    CONSTANT_INVENTORY,
    coeff_F,
    coeff_G,
    contraction_rate,
    heat_lower_exponent,
    local_logsob_grad,
    rho_tilde_scalar,
)
from .inequalities import CheckReport, EvalContext
from .harness import (
    ReportSet,
    SamplerSpec,
    Scenario,
    ScenarioError,
    build_scenario,
    load_scenario,
    run_scenario,
    sample_functions,
)
from .reporting import canonical_json, emit_reports, parse_json

__version__ = "0.1.0"

__all__ = [
    "ModelSpace",
    "PotentialSpec",
    "SpaceSpec",
    "build_model_space",
    "CurvaturePair",
    "Generator",
    "analytic_K",
    "assemble_generator",
    "cd_margin",
    "estimate_K",
    "SemigroupCache",
    "apply_semigroup",
    "heat_kernel",
    "heat_kernel_matrix",
    "spectral_decompose",
    "spectral_gap",
    "sphere_kernel_series",
    "CONSTANT_INVENTORY",
    "coeff_F",
    "coeff_G",
    "contraction_rate",
    "heat_lower_exponent",
    "local_logsob_grad",
    "rho_tilde_scalar",
    "CheckReport",
    "EvalContext",
    "ReportSet",
    "SamplerSpec",
    "Scenario",
    "ScenarioError",
    "build_scenario",
    "load_scenario",
    "run_scenario",
    "sample_functions",
    "canonical_json",
    "emit_reports",
    "parse_json",
    "__version__",
]
