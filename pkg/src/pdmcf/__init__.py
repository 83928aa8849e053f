"""All-pairs multicommodity network flow by adaptive, over-relaxed PDHG."""

from .generator import generate_instance, generate_topology, perturb_weights
from .graph import (Topology, check_strong_connectivity, dual_times_incidence,
                    flows_to_traffic, max_degree, shortest_path_flow, step_size_eta)
from .instance import ProblemInstance
from .projection import project_flows, project_simplex_column
from .residual import ResidualReport, optimality_residual
from .solver import (Solution, SolverConfig, SolverDivergence, SolverState, TraceRecord,
                     WarmStart, default_epsilon, solve, warm_start_from_perturbed)
from .utilities import (UtilitySpec, UtilityValue, prox_conjugate, total_utility,
                        utility_derivative)

__version__ = "0.1.0"

__all__ = [
    "Topology", "flows_to_traffic", "dual_times_incidence", "max_degree", "step_size_eta",
    "check_strong_connectivity", "shortest_path_flow",
    "UtilitySpec", "UtilityValue", "total_utility", "utility_derivative", "prox_conjugate",
    "project_simplex_column", "project_flows",
    "ResidualReport", "optimality_residual",
    "ProblemInstance",
    "SolverConfig", "SolverState", "TraceRecord", "WarmStart", "Solution",
    "SolverDivergence", "default_epsilon", "solve", "warm_start_from_perturbed",
    "generate_instance", "generate_topology", "perturb_weights",
]
