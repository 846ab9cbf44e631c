"""
Choosing the multipliers
========================

Too small and the penalties lose to the objective, too large and the
annealer cannot move.  A coarse logarithmic scan picks the decade of each
multiplier, a linear scan refines it, and the winner is verified.
"""

from powerpart import PartitionModel, compile_qubo_plain, generate_random_graph, solve_exhaustive_cqm, solve_exhaustive_qubo
from powerpart.tuning import GridSpec, grid_search_two_stage

g = generate_random_graph(6, 0.5, seed=3)
model = PartitionModel(g, 2)

res = grid_search_two_stage(model, GridSpec(K=6))
print("chosen", res.weights)
for stage in ("log", "linear", "verify"):
    pts = [p for p in res.trace if p.stage == stage]
    ok = [p for p in pts if p.violations == 0]
    print(f"{stage:6s} {len(pts):3d} points, {len(ok)} without violations")

# the tuned QUBO has the same optimum as the constrained problem
print(solve_exhaustive_qubo(compile_qubo_plain(model, res.weights)).objective, solve_exhaustive_cqm(model).objective)

res.write_trace("tune_trace.csv")
