"""Dispatchable virtual oscillator control: controller law, network models and scenario runner."""

from ._dvoc import (
    DvocParams,
    NumericError,
    Scenario,
    ValidationError,
    __version__,
    blackstart_analytic,
    builtin_scenarios,
    check_consistency,
    droop_approx_freq,
    droop_approx_vmag_ss,
    droop_linearized_vmag_ss,
    dvoc_rhs,
    dvoc_rhs_polar,
    gain_matrix,
    kappa_from_line,
    load_scenario,
    magnitude_error,
    measure_power,
    parse_scenario,
    phase_error,
    run,
    stationary_point,
)

__all__ = [
    "DvocParams",
    "NumericError",
    "Scenario",
    "ValidationError",
    "__version__",
    "blackstart_analytic",
    "builtin_scenarios",
    "check_consistency",
    "droop_approx_freq",
    "droop_approx_vmag_ss",
    "droop_linearized_vmag_ss",
    "dvoc_rhs",
    "dvoc_rhs_polar",
    "gain_matrix",
    "kappa_from_line",
    "load_scenario",
    "magnitude_error",
    "measure_power",
    "parse_scenario",
    "phase_error",
    "run",
    "stationary_point",
]
