"""Power-network partitioning as constrained and QUBO models."""

from .graph import (
    CliquePairSpec,
    PowerGraph,
    Uniform,
    generate_clique_pair,
    generate_grid_network,
    generate_random_graph,
    load_network,
    save_network,
)
from .models import (
    PartitionModel,
    PartitionQubo,
    PenaltyWeights,
    SolveReport,
    compile_qubo_plain,
    compile_qubo_sharing,
    decode_assignment,
    evaluate_cqm,
    flow_value,
)
from .qubo import QuadraticModel, Qubo, VariableRegistry
from .solvers import (
    AnnealSchedule,
    parallel_tempering,
    simulated_annealing,
    solve_exhaustive_cqm,
    solve_exhaustive_qubo,
    tabu_search,
)

__version__ = "0.1.0"
