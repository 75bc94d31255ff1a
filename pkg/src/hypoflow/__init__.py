"""Spectral, flow-Poincare and Monte Carlo analysis of hypocoercive generators."""

from .hilbert import (
    GeneratorDecomposition,
    LinOp,
    NumericalError,
    NotDissipativeError,
    WeightedSpace,
    adjoint,
    relaxation_time,
    singular_value_gap,
    spectral_gap,
)
from .classical import PotentialSpec, build_langevin, build_overdamped
from .quantum import LindbladModel, build_lindblad_heisenberg, thermal_qubit, two_qubit_lift
from .lifting import check_lift_conditions, overdamped_limit, rate_scan, upper_bound
from .flow import fit_constants, flow_ratio, space_time_terms, verify_decay
from .sde import SimConfig, estimate_decay_rate, simulate_langevin, simulate_overdamped

__all__ = [
    "GeneratorDecomposition", "LinOp", "NumericalError", "NotDissipativeError", "WeightedSpace",
    "adjoint", "relaxation_time", "singular_value_gap", "spectral_gap",
    "PotentialSpec", "build_langevin", "build_overdamped",
    "LindbladModel", "build_lindblad_heisenberg", "thermal_qubit", "two_qubit_lift",
    "check_lift_conditions", "overdamped_limit", "rate_scan", "upper_bound",
    "fit_constants", "flow_ratio", "space_time_terms", "verify_decay",
    "SimConfig", "estimate_decay_rate", "simulate_langevin", "simulate_overdamped",
]

__version__ = "0.1.0"
