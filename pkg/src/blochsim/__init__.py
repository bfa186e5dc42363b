"""Numerical study of Bloch-like oscillations in the energy-level ladder of
driven quantum systems.

Library layout: core (states, operators, eigensolver contracts), models
(the three Hamiltonians and their closed-form oracles), propagate
(norm-preserving time stepping), adiabatic (instantaneous-frame tracking
and the frame generator), analysis (observable estimators), experiments
(presets and ensembles), output/plots (result bundles), cli.
"""

from ._version import __version__
from .core import (
    Basis,
    EigenDecomposition,
    HermitianOperator,
    StateVector,
    eig_hermitian,
    energy_uncertainty,
    expectation,
)
from .errors import ConfigError, NumericalAbort
from .experiments import (
    ScenarioResult,
    preset_config,
    preset_names,
    resolve_config,
    run_scenario,
)
from .models import (
    Disorder,
    DrivenHOSpec,
    LZGridSpec,
    SingleBandSpec,
    build_model,
    initial_state,
)
from .propagate import PropagationPlan, Trajectory, propagate, uniform_plan

__all__ = [
    "__version__",
    "Basis",
    "ConfigError",
    "Disorder",
    "DrivenHOSpec",
    "EigenDecomposition",
    "HermitianOperator",
    "LZGridSpec",
    "NumericalAbort",
    "PropagationPlan",
    "ScenarioResult",
    "SingleBandSpec",
    "StateVector",
    "Trajectory",
    "build_model",
    "eig_hermitian",
    "energy_uncertainty",
    "expectation",
    "initial_state",
    "preset_config",
    "preset_names",
    "propagate",
    "resolve_config",
    "run_scenario",
    "uniform_plan",
]
