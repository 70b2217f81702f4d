"""Physics-informed PDE solvers around a convolved parametric grid encoder
with an attention decoder, baseline architectures, and a benchmark harness."""

from .architectures import (ARCHITECTURES, build_m4, build_model, build_pgcan,
                            build_pixel, build_vpinn)
from .base import (CallableModel, CoordinateModel, DerivativeBundle,
                   count_parameters, derivatives, flatten_parameters,
                   unflatten_parameters)
from .grid import GridSpec, ParametricGrid, cosine_warp, cosine_warp_derivative
from .problems import PROBLEMS, build_problem
from .solver import PDESolver
from .training import TrainConfig, compute_loss, dynamic_weights, train

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "CallableModel",
    "CoordinateModel",
    "DerivativeBundle",
    "GridSpec",
    "PDESolver",
    "PROBLEMS",
    "ParametricGrid",
    "TrainConfig",
    "build_m4",
    "build_model",
    "build_pgcan",
    "build_pixel",
    "build_problem",
    "build_vpinn",
    "compute_loss",
    "cosine_warp",
    "cosine_warp_derivative",
    "count_parameters",
    "derivatives",
    "dynamic_weights",
    "flatten_parameters",
    "train",
    "unflatten_parameters",
]
