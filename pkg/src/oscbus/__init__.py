"""Gaussian dynamics of two oscillators coupled through a harmonic network."""
__version__ = "0.1.0"

from .errors import (
    ConditioningWarning,
    ConfigError,
    FidelityClampWarning,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidStateError,
    NoSteadyStateError,
    NotPositiveDefiniteError,
    NumericError,
    OscbusError,
    PerturbationBreakdownWarning,
    RWAWarning,
    StructuralViolationError,
    UnsupportedTopologyError,
)
from .symplectic import (
    QuadraticForm,
    WilliamsonDecomposition,
    check_normal_form_conditions,
    group_degenerate_modes,
    is_symplectic,
    symplectic_form,
    symplectic_spectrum,
    williamson,
)
from .networks import (
    Attachment,
    NetworkSpec,
    SystemSpec,
    analytic_williamson,
    assemble_system_hessian,
    build_network_hessian,
    network_williamson,
)
from .dynamics import (
    CovarianceState,
    NoiseModel,
    classify_mode_baths,
    drift_and_diffusion,
    propagate_cm,
    steady_state,
    thermal_bath_noise,
    thermal_noise,
)
from .effective import (
    EffectiveModel,
    build_effective_hessian,
    build_effective_model,
    build_effective_noise,
    occupation_closed_form,
    propagate_effective,
    transfer_function_F,
)
from .observables import (
    InitialStateSpec,
    ReducedState,
    build_initial_cm,
    gaussian_fidelity,
    occupation_number,
    reduce_to_oscillator,
)

__all__ = [
    "__version__",
    "ConditioningWarning",
    "ConfigError",
    "FidelityClampWarning",
    "InvalidArgumentError",
    "InvalidDimensionError",
    "InvalidStateError",
    "NoSteadyStateError",
    "NotPositiveDefiniteError",
    "NumericError",
    "OscbusError",
    "PerturbationBreakdownWarning",
    "RWAWarning",
    "StructuralViolationError",
    "UnsupportedTopologyError",
    "QuadraticForm",
    "WilliamsonDecomposition",
    "check_normal_form_conditions",
    "group_degenerate_modes",
    "is_symplectic",
    "symplectic_form",
    "symplectic_spectrum",
    "williamson",
    "Attachment",
    "NetworkSpec",
    "SystemSpec",
    "analytic_williamson",
    "assemble_system_hessian",
    "build_network_hessian",
    "network_williamson",
    "CovarianceState",
    "NoiseModel",
    "classify_mode_baths",
    "drift_and_diffusion",
    "propagate_cm",
    "steady_state",
    "thermal_bath_noise",
    "thermal_noise",
    "EffectiveModel",
    "build_effective_hessian",
    "build_effective_model",
    "build_effective_noise",
    "occupation_closed_form",
    "propagate_effective",
    "transfer_function_F",
    "InitialStateSpec",
    "ReducedState",
    "build_initial_cm",
    "gaussian_fidelity",
    "occupation_number",
    "reduce_to_oscillator",
]
