"""Learned dual-feasible lower bounds for AC optimal power flow.

A neural network predicts part of the dual of the SDP relaxation; a
closed-form completion turns any prediction into a dual-feasible point whose
objective is a valid lower bound on the AC-OPF cost.
"""

from .completion import Prediction, backward, complete, complete_and_grad
from .data import InstanceSet, LoadInstance, PerturbationConfig, generate_instances, read_instances, write_instances
from .dual import DualSolution, FeasibilityReport, dual_objective, verify_dual
from .estimator import DualBoundEstimator
from .grid import Network, build_branch_admittance, validate_network
from .hermitian import min_eig
from .matpower import CaseLoweringError, CaseParseError, load_network, parse_case
from .oracle import GridConfig, brute_force_opf
from .training import evaluate, new_model, train

__version__ = "0.1.0"

__all__ = [
    "CaseLoweringError",
    "CaseParseError",
    "DualBoundEstimator",
    "DualSolution",
    "FeasibilityReport",
    "GridConfig",
    "InstanceSet",
    "LoadInstance",
    "Network",
    "PerturbationConfig",
    "Prediction",
    "backward",
    "brute_force_opf",
    "build_branch_admittance",
    "complete",
    "complete_and_grad",
    "dual_objective",
    "evaluate",
    "generate_instances",
    "load_network",
    "min_eig",
    "new_model",
    "parse_case",
    "read_instances",
    "train",
    "validate_network",
    "verify_dual",
    "write_instances",
]
