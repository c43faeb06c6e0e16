"""Finite-data secure key rates for four-intensity MDI-QKD with source errors."""

__version__ = "0.1.0"

from .channel_sim import (
    ChannelParams,
    MonteCarloYield,
    PairObservables,
    build_observables,
    monte_carlo_yield,
    pair_yield,
    side_transmittance,
    single_photon_pair_truth,
    vacuum_error_component,
    validate_model,
)
from .keyrate_core import (
    AnalysisInfeasible,
    AnalysisInputs,
    ExpectationEnvelope,
    KeyRateReport,
    SigmaFactors,
    binary_entropy,
    e11_upper,
    expectation_envelopes,
    h_range,
    key_rate_at,
    rate_function,
    s11_lower,
    s_minus_upper,
    s_plus_lower,
    secure_key_rate,
    sigma_factors,
)
from .optimizer import OptimizationProblem, OptimizationResult, evaluate, optimize
from .source_model import (
    DecoyConditionReport,
    PhotonCoeffBounds,
    SideSources,
    SourceEnsemble,
    check_decoy_conditions,
    coeff_bounds,
    coeff_interval,
    poisson_coeff,
)
from .stat_bounds import (
    ChernoffConfig,
    Envelope,
    InvocationCounter,
    SolverError,
    chernoff_lower,
    chernoff_upper,
    combo_lower,
    combo_upper,
    envelope,
)

__all__ = [
    "AnalysisInfeasible",
    "AnalysisInputs",
    "ChannelParams",
    "ChernoffConfig",
    "DecoyConditionReport",
    "Envelope",
    "ExpectationEnvelope",
    "InvocationCounter",
    "KeyRateReport",
    "MonteCarloYield",
    "OptimizationProblem",
    "OptimizationResult",
    "PairObservables",
    "PhotonCoeffBounds",
    "SideSources",
    "SigmaFactors",
    "SolverError",
    "SourceEnsemble",
    "binary_entropy",
    "build_observables",
    "check_decoy_conditions",
    "chernoff_lower",
    "chernoff_upper",
    "coeff_bounds",
    "coeff_interval",
    "combo_lower",
    "combo_upper",
    "e11_upper",
    "envelope",
    "evaluate",
    "expectation_envelopes",
    "h_range",
    "key_rate_at",
    "monte_carlo_yield",
    "optimize",
    "pair_yield",
    "poisson_coeff",
    "rate_function",
    "s11_lower",
    "s_minus_upper",
    "s_plus_lower",
    "secure_key_rate",
    "side_transmittance",
    "sigma_factors",
    "single_photon_pair_truth",
    "vacuum_error_component",
    "validate_model",
]
