"""
Exact and heuristic solvers
===========================

Small instances are solved by enumeration, both in the constrained form
and as a QUBO.  Larger ones go to simulated annealing, tabu search or
parallel tempering, all seeded and repeatable.
"""

from powerpart import (
    AnnealSchedule,
    CliquePairSpec,
    PartitionModel,
    PenaltyWeights,
    compile_qubo_plain,
    generate_clique_pair,
    parallel_tempering,
    simulated_annealing,
    solve_exhaustive_cqm,
    solve_exhaustive_qubo,
    tabu_search,
)

g = generate_clique_pair(CliquePairSpec(4, seed=2))
model = PartitionModel(g, 2)
problem = compile_qubo_plain(model, PenaltyWeights(10.0, 0.1, K=6))

exact = solve_exhaustive_cqm(model)
print("constrained optimum", exact.objective, exact.partition)

qubo = solve_exhaustive_qubo(problem)
print("QUBO optimum       ", qubo.objective, qubo.partition, "energy", qubo.energy)

for rep in (
    simulated_annealing(problem, AnnealSchedule(reads=100, sweeps=500, seed=1), select="objective"),
    tabu_search(problem, seed=1, restarts=10, select="objective"),
    parallel_tempering(problem, sweeps=500, seed=1, select="objective"),
):
    print(f"{rep.solver:5s} objective {rep.objective} violations {rep.violations} in {rep.wall_time:.3f}s")

# with a time limit the solvers keep restarting until the budget is spent
rep = tabu_search(problem, seed=1, restarts=None, time_limit=0.5)
print("tabu for 0.5s:", rep.metadata["restarts"], "restarts, incumbent trace", rep.samples.trace[:3])
