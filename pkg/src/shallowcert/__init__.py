"""Desk-scale tools for certifying shallow pure-state approximations of
weakly noisy quantum states."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BudgetExhausted, CapExceeded, ConfigError, DimensionError, InvariantViolation, ShallowCertError,
)
from .qsim import DensityMatrix, StateVector, KrausChannel, PauliString  # noqa: F401
from .noise import ChannelSpec, purity_lower_bound, monte_carlo_overlap  # noqa: F401
from .ansatz import Architecture, ParameterSet, build_architecture, prepare_qnn_state  # noqa: F401
from .shadows import StateSource, EstimatorConfig  # noqa: F401
from .scp import ScpConfig, run_scp  # noqa: F401
