"""Mixed residual method (MIM) for second-order elliptic equations on balls.

Networks output ``(u, p)`` with ``p`` approximating ``grad u``; a final
modification layer enforces the boundary condition exactly, and training
minimizes the Monte Carlo least-squares residual of the first-order system.
The ``theory`` module evaluates the constants and bounds of the error
analysis and checks them against live networks.
"""
from .geometry import BallDomain, sample_boundary, sample_interior, volume
from .modifier import BoundaryModifier, check_assumption, modify
from .network import Activation, Jet, NetworkParams, forward, forward_jet, init_params, scalar_grad
from .problem import AssumptionError, EllipticProblem, ManufacturedSolution, h1_error, validate_assumptions
from .registry import bundled_names, get_problem
from .trainer import DivergenceError, TrainConfig, TrainReport, error_decomposition_report, train
from .loss import empirical_loss, loss_and_gradient, loss_value

__all__ = [
    "Activation",
    "AssumptionError",
    "BallDomain",
    "BoundaryModifier",
    "DivergenceError",
    "EllipticProblem",
    "Jet",
    "ManufacturedSolution",
    "NetworkParams",
    "TrainConfig",
    "TrainReport",
    "bundled_names",
    "check_assumption",
    "empirical_loss",
    "error_decomposition_report",
    "forward",
    "forward_jet",
    "get_problem",
    "h1_error",
    "init_params",
    "loss_and_gradient",
    "loss_value",
    "modify",
    "sample_boundary",
    "sample_interior",
    "scalar_grad",
    "train",
    "validate_assumptions",
    "volume",
]
