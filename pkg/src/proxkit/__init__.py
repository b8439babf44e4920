"""Proximal gradient methods: prox catalog, smooth terms, solvers and verifiers."""

from . import core, oracle, problems, prox, smooth, solve
from .core import BlockOperator, LinearOperator, operator_norm
from .errors import (CapabilityError, ConfigError, DomainError, InputError, ProxkitError,
                     ReferenceValueError, SamplingError, ZeroOperatorError)
from .solve import (SolveReport, SolverConfig, StepSchedule, block_forward_backward,
                    dual_forward_backward, fista, forward_backward, projected_gradient)

__version__ = "0.1.0"

__all__ = [
    "core", "oracle", "problems", "prox", "smooth", "solve",
    "BlockOperator", "LinearOperator", "operator_norm",
    "CapabilityError", "ConfigError", "DomainError", "InputError", "ProxkitError",
    "ReferenceValueError", "SamplingError", "ZeroOperatorError",
    "SolveReport", "SolverConfig", "StepSchedule", "block_forward_backward",
    "dual_forward_backward", "fista", "forward_backward", "projected_gradient",
]
