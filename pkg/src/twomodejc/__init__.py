"""Two-mode Jaynes-Cummings dynamics: Magnus, Wei-Norman, fluctuation and exact solvers."""

from .errors import (
    IntegrationError,
    NoSignChange,
    NonFiniteDerivative,
    NumericalError,
    StepSizeUnderflow,
    TruncationError,
    ValidationError,
    WeiNormanSingularity,
)
from .model import InitialState, ModelParams, Trajectory, rabi_amplitude, resonant_solution

__all__ = [
    "IntegrationError",
    "NoSignChange",
    "NonFiniteDerivative",
    "NumericalError",
    "StepSizeUnderflow",
    "TruncationError",
    "ValidationError",
    "WeiNormanSingularity",
    "InitialState",
    "ModelParams",
    "Trajectory",
    "rabi_amplitude",
    "resonant_solution",
]

__version__ = "0.1.0"
