"""mfclab: a numerical laboratory for interacting particle control systems.

Per-particle states live in weighted discretizations of delay or
age-profile function spaces; the package simulates controlled ensembles
under common noise, their lifted block-function twins, and checks the
structural claims that connect them: lifting consistency, value convergence
in the particle count, explicit feedback optimality against independent
oracles, operator dissipativity, and value regularity in transport metrics.
"""

from .config import ConfigError, RunConfig, parse_config
from .dynamics import (PathBundle, SimConfig, SimulationError, SystemSpec,
                       gaussian_increment, noise_tensor, simulate_lifted,
                       simulate_particles, simulate_sdde_direct)
from .experiments import (ExperimentReport, ReportRow, aggregate_costate,
                          exp_convergence_sweep, exp_diagnose,
                          exp_feedback_vs_bruteforce, exp_lifting_identity,
                          exp_oracle_compare, exp_regularity_probe, sdde_order_study)
from .hamiltonian import (CostSpec, QuadraticControlCost, TabulatedControlCost,
                          cost_of_pathbundle, feedback_gamma_star,
                          hamiltonian_pointwise, truncation_radius)
from .measures import (AtomLaw, BlockFunction, EmpiricalMeasure, block_average,
                       ensemble_dual_norm, ensemble_norm, lift, moment, pushforward,
                       sample_atoms, wasserstein)
from .models import (AdvertisingParams, Model, ValidationError, VintageParams,
                     build_advertising, build_model, build_vintage,
                     convex_variant_cost, inequality_report, mixture_law, point_law,
                     smooth_law)
from .policies import (ConstantPolicy, CostateFeedback, CostateFieldFeedback,
                       FeedbackPolicy, OpenLoopPolicy)
from .spaces import (AssemblyError, GeneratorBundle, OperatorDiagnostics, SpaceSpec,
                     assemble_generator, build_delay_space, build_vintage_space,
                     bundle_from_matrix, dual_norm, inner, norm, operator_norm,
                     pairing_constant, verify_operator_assumptions, weighted_adjoint)
from .value_lab import (AdjointOracle, OpenLoopOracle, ValueEstimate,
                        build_costate_feedback, deterministic_value, estimate_cost,
                        oracle_adjoint_linear, oracle_open_loop, path_costs)

__version__ = "0.1.0"

__all__ = [
    "AdjointOracle", "AdvertisingParams", "AssemblyError", "AtomLaw", "BlockFunction",
    "ConfigError", "ConstantPolicy", "CostSpec", "CostateFeedback",
    "CostateFieldFeedback", "EmpiricalMeasure", "ExperimentReport", "FeedbackPolicy",
    "GeneratorBundle", "Model", "OpenLoopOracle", "OpenLoopPolicy",
    "OperatorDiagnostics", "PathBundle", "QuadraticControlCost", "ReportRow",
    "RunConfig", "SimConfig", "SimulationError", "SpaceSpec", "SystemSpec",
    "TabulatedControlCost", "ValidationError", "ValueEstimate", "VintageParams",
    "aggregate_costate", "assemble_generator", "block_average", "build_advertising",
    "build_costate_feedback", "build_delay_space", "build_model", "build_vintage",
    "build_vintage_space", "bundle_from_matrix", "convex_variant_cost",
    "cost_of_pathbundle", "deterministic_value", "dual_norm", "ensemble_dual_norm",
    "ensemble_norm", "estimate_cost", "exp_convergence_sweep", "exp_diagnose",
    "exp_feedback_vs_bruteforce", "exp_lifting_identity", "exp_oracle_compare",
    "exp_regularity_probe", "feedback_gamma_star", "gaussian_increment",
    "hamiltonian_pointwise", "inequality_report", "inner", "lift", "mixture_law",
    "moment", "noise_tensor", "norm", "operator_norm", "oracle_adjoint_linear",
    "oracle_open_loop", "pairing_constant", "parse_config", "path_costs", "point_law",
    "pushforward", "sample_atoms", "sdde_order_study", "simulate_lifted",
    "simulate_particles", "simulate_sdde_direct", "smooth_law", "truncation_radius",
    "verify_operator_assumptions", "wasserstein", "weighted_adjoint",
]
