"""
Compiling the partition problem
===============================

The objective and both constraint families go into one QUBO; the
multipliers weigh one-hot assignment against regional balance.
"""

import numpy as np

from powerpart import CliquePairSpec, PartitionModel, PenaltyWeights, compile_qubo_plain, compile_qubo_sharing, generate_clique_pair
from powerpart.models import plain_variable_count, sharing_variable_count

g = generate_clique_pair(CliquePairSpec(3, seed=0))
model = PartitionModel(g, 2, alpha=1.0, beta=10.0, k=0.5)

plain = compile_qubo_plain(model, PenaltyWeights(10.0, 0.1, K=6))
print("plain:", plain.num_variables, "variables =", plain_variable_count(6, 2, 6))
print(plain.qubo)

# the two-clique partition, with the slack bits set to their best values
x = np.zeros(plain.num_variables, dtype=np.int8)
x[: 12] = [1, 0] * 3 + [0, 1] * 3
for block in plain.slack_blocks:
    block.fill(x)
print(plain.penalty_breakdown(x))
rep = plain.report(x, "by hand")
print(rep.to_json(g))

# letting neighbouring regions share electricity adds flow and product bits
sharing = compile_qubo_sharing(model, PenaltyWeights(10.0, 0.1, 1.0, K=6))
print("sharing:", sharing.num_variables, "variables =", sharing_variable_count(6, 2, 6, g.num_edges))
print(sorted({name[0] for name in sharing.registry.names}))

# the QUBO can be written out in a plain text format
print(plain.qubo.to_text().splitlines()[:5])
