"""Delayed leader-follower Hegselmann-Krause dynamics and their mean-field limits."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .core import DelayConfig, HistoryFunction, Kernel, ModelConfig, history_eval, kernel_min_on_ball
from .dde import DenseSolution, integrate, solution_eval
from .errors import (
    ConfigurationError,
    DivergenceError,
    HKDelayError,
    InvalidArgumentError,
    OutOfRangeError,
    UnsupportedInputError,
)
from .particle import ConsensusCertificate, ParticleState, certificate, diameter, simulate

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "ConsensusCertificate",
    "DelayConfig",
    "DenseSolution",
    "DivergenceError",
    "HKDelayError",
    "HistoryFunction",
    "InvalidArgumentError",
    "Kernel",
    "ModelConfig",
    "OutOfRangeError",
    "ParticleState",
    "UnsupportedInputError",
    "certificate",
    "diameter",
    "history_eval",
    "integrate",
    "kernel_min_on_ball",
    "simulate",
    "solution_eval",
]
