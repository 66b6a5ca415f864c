"""Qubit pure dephasing from spectrally diffusing two-level systems.

Monte Carlo estimation of the dephasing factor D(t) over stochastic
spectral-diffusion realizations, together with the closed-form correlators,
asymptotic laws, and regime diagnostics it is validated against.
"""
from ._version import __version__
from .analytics import (
    BathScales,
    LawParams,
    RegimeReport,
    SweepResult,
    TemperatureCalibration,
    correlator_closed,
    crossover_diagnostics,
    cumulant_exact_shorttime,
    cumulant_shorttime_asymptote,
    dephasing_bracket,
    dephasing_law,
    dephasing_law_curve,
    mean_c,
    relaxation_cumulant,
    resonance_sum_ensemble,
    resonance_sum_estimate,
    small_diffusion_law,
    temperature_map,
    temperature_sweep,
)
from .diffusion import (
    KaEngine,
    ShiftTrajectory,
    TelegraphEngine,
    ThermalBathParams,
    WidthParams,
    ka_step,
    propagator_density,
    sample_static_shift,
    stationary_density,
    telegraph_marginal_samples,
    telegraph_realization,
    width_function,
)
from .dynamics import (
    AmplitudeRecord,
    SolverConfig,
    bessel_weights,
    coefficient_c,
    evolve_full,
    evolve_markov,
    evolve_markov_trajectories,
    s4_factor,
    two_level_exact,
)
from .ensemble import (
    EnsembleSpec,
    QubitParams,
    TlsParams,
    build_ensemble,
    check_band,
    golden_rule_rate,
    mean_tls_count,
    sample_coupling,
)
from .errors import ConfigError, NumericError, PreconditionError, SchemaError
from .harness import (
    DephasingCurve,
    FitResult,
    GridSpec,
    RunConfig,
    estimate_curve,
    fit_powerlaw,
    load_run,
    persist_run,
    run_experiment,
)

__all__ = [
    "__version__",
    "AmplitudeRecord",
    "BathScales",
    "ConfigError",
    "DephasingCurve",
    "EnsembleSpec",
    "FitResult",
    "GridSpec",
    "KaEngine",
    "LawParams",
    "NumericError",
    "PreconditionError",
    "QubitParams",
    "RegimeReport",
    "RunConfig",
    "SchemaError",
    "ShiftTrajectory",
    "SolverConfig",
    "SweepResult",
    "TelegraphEngine",
    "TemperatureCalibration",
    "ThermalBathParams",
    "TlsParams",
    "WidthParams",
    "bessel_weights",
    "build_ensemble",
    "check_band",
    "coefficient_c",
    "correlator_closed",
    "crossover_diagnostics",
    "cumulant_exact_shorttime",
    "cumulant_shorttime_asymptote",
    "dephasing_bracket",
    "dephasing_law",
    "dephasing_law_curve",
    "estimate_curve",
    "evolve_full",
    "evolve_markov",
    "evolve_markov_trajectories",
    "fit_powerlaw",
    "golden_rule_rate",
    "ka_step",
    "load_run",
    "mean_c",
    "mean_tls_count",
    "persist_run",
    "propagator_density",
    "relaxation_cumulant",
    "resonance_sum_ensemble",
    "resonance_sum_estimate",
    "run_experiment",
    "s4_factor",
    "sample_coupling",
    "sample_static_shift",
    "small_diffusion_law",
    "stationary_density",
    "telegraph_marginal_samples",
    "telegraph_realization",
    "temperature_map",
    "temperature_sweep",
    "two_level_exact",
    "width_function",
]
